//! Brick-wall hybrid circuit dynamics under constant or linearly driven
//! measurement probability.
//!
//! One time unit is two half-steps. Half-step A applies fresh random
//! two-qubit Cliffords to bonds `(2k, 2k+1)`, half-step B to bonds
//! `(2k+1, 2k+2 mod L)` (which includes the wraparound bond `(L-1, 0)`).
//! Each half-step also has a measurement layer in which every system qubit is
//! measured in `Z` independently with the probability in force at the start
//! of that half-step.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clifford::sample_uniform_2q;
use crate::observables::{
    ancilla_entropy, entanglement_entropy, half_chain_entropy_of, tripartite_mutual_information_of, ObservableError,
    Region,
};
use crate::stabilizer::{FixtureGate, MeasurementOutcome, StabilizerError, Tableau};

/// Default spacing of the `p` grid on which ramps are sampled.
pub const DEFAULT_SAMPLE_SPACING: f64 = 0.005;

const CROSSING_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("measurement probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error(transparent)]
    Stabilizer(#[from] StabilizerError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
}

/// Order of the two layers inside a half-step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerOrder {
    #[default]
    UnitaryFirst,
    MeasurementFirst,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    /// Number of system qubits on the periodic chain.
    pub l: usize,
    #[serde(default)]
    pub layer_order: LayerOrder,
    /// Site entangled with the ancilla; defaults to `L/2`.
    #[serde(default)]
    pub ancilla_site: Option<usize>,
}

impl CircuitConfig {
    pub fn new(l: usize) -> Result<Self, ProtocolError> {
        let c = Self {
            l,
            layer_order: LayerOrder::default(),
            ancilla_site: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.l < 2 || !self.l.is_multiple_of(2) {
            return Err(ProtocolError::Config(format!(
                "system size must be even and at least 2, got {}",
                self.l
            )));
        }
        if let Some(s) = self.ancilla_site {
            if s >= self.l {
                return Err(ProtocolError::Config(format!(
                    "ancilla site {s} outside a chain of {}",
                    self.l
                )));
            }
        }
        Ok(())
    }

    pub fn ancilla_site(&self) -> usize {
        self.ancilla_site.unwrap_or(self.l / 2)
    }
}

/// Drive direction of a linear ramp.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Start in the area-law phase (`p0 > p_c`) and decrease `p`.
    FromArea,
    /// Start in the volume-law phase (`p0 < p_c`) and increase `p`.
    FromVolume,
}

impl Direction {
    /// `+1` when `p` increases with time.
    pub fn sign(self) -> f64 {
        match self {
            Direction::FromArea => -1.0,
            Direction::FromVolume => 1.0,
        }
    }
}

/// Measurement probability as a function of circuit time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum DrivingSchedule {
    Constant {
        p: f64,
    },
    /// `p(t) = p_c ± R (t − t_c)` from `p(0) = p0`, held at `p_end` once reached.
    LinearRamp {
        p_c: f64,
        p0: f64,
        rate: f64,
        direction: Direction,
        p_end: f64,
    },
}

fn check_probability(p: f64) -> Result<(), ProtocolError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ProtocolError::Probability(p))
    }
}

impl DrivingSchedule {
    pub fn constant(p: f64) -> Result<Self, ProtocolError> {
        check_probability(p)?;
        Ok(Self::Constant { p })
    }

    /// A ramp from `p0` across `p_c`; `p_end` defaults to the mirror image
    /// `p_c ∓ (p0 − p_c)` clamped to `[0, 1]`.
    pub fn ramp(p_c: f64, p0: f64, rate: f64, direction: Direction, p_end: Option<f64>) -> Result<Self, ProtocolError> {
        let p_end = p_end.unwrap_or_else(|| (2.0 * p_c - p0).clamp(0.0, 1.0));
        let s = Self::LinearRamp {
            p_c,
            p0,
            rate,
            direction,
            p_end,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        match *self {
            Self::Constant { p } => check_probability(p),
            Self::LinearRamp {
                p_c,
                p0,
                rate,
                direction,
                p_end,
            } => {
                for p in [p_c, p0, p_end] {
                    check_probability(p)?;
                }
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(ProtocolError::Schedule(format!(
                        "ramp rate must be positive, got {rate}"
                    )));
                }
                let ok = match direction {
                    Direction::FromArea => p0 > p_c && p_end <= p_c,
                    Direction::FromVolume => p0 < p_c && p_end >= p_c,
                };
                if !ok {
                    return Err(ProtocolError::Schedule(format!(
                        "{direction:?} ramp needs p0 and p_end on opposite sides of p_c = {p_c} \
                         (p0 = {p0}, p_end = {p_end})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Probability in force at time `t` (time units since the drive started).
    pub fn p_at(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { p } => p,
            Self::LinearRamp {
                p0,
                rate,
                direction,
                p_end,
                ..
            } => {
                let p = p0 + direction.sign() * rate * t;
                match direction {
                    Direction::FromArea => p.max(p_end),
                    Direction::FromVolume => p.min(p_end),
                }
            }
        }
    }

    /// Time at which the ramp reaches `p_c`.
    pub fn t_c(&self) -> Option<f64> {
        match *self {
            Self::Constant { .. } => None,
            Self::LinearRamp { p_c, p0, rate, .. } => Some((p0 - p_c).abs() / rate),
        }
    }

    pub fn p_c(&self) -> Option<f64> {
        match *self {
            Self::Constant { .. } => None,
            Self::LinearRamp { p_c, .. } => Some(p_c),
        }
    }

    pub fn start(&self) -> f64 {
        match *self {
            Self::Constant { p } => p,
            Self::LinearRamp { p0, .. } => p0,
        }
    }

    pub fn rate(&self) -> Option<f64> {
        match *self {
            Self::Constant { .. } => None,
            Self::LinearRamp { rate, .. } => Some(rate),
        }
    }

    pub fn direction(&self) -> Option<Direction> {
        match *self {
            Self::Constant { .. } => None,
            Self::LinearRamp { direction, .. } => Some(direction),
        }
    }

    /// Same drive law, started from `p_start` instead of `p0`.
    pub fn started_at(&self, p_start: f64) -> Result<Self, ProtocolError> {
        match *self {
            Self::Constant { .. } => Err(ProtocolError::Schedule(
                "a constant schedule has no ramp to restart".into(),
            )),
            Self::LinearRamp {
                p_c,
                rate,
                direction,
                p_end,
                ..
            } => {
                let s = Self::LinearRamp {
                    p_c,
                    p0: p_start,
                    rate,
                    direction,
                    p_end,
                };
                s.validate()?;
                Ok(s)
            }
        }
    }

    fn reached(&self, p_now: f64, target: f64) -> bool {
        match self.direction() {
            Some(Direction::FromArea) => p_now <= target + CROSSING_EPS,
            Some(Direction::FromVolume) => p_now >= target - CROSSING_EPS,
            None => true,
        }
    }

    /// Grid `p_c + kΔ` covering the ramp window, in driving order.
    pub fn sample_grid(&self, spacing: f64) -> Vec<f64> {
        let Self::LinearRamp {
            p_c,
            p0,
            p_end,
            direction,
            ..
        } = *self
        else {
            return Vec::new();
        };
        let (lo, hi) = (p0.min(p_end), p0.max(p_end));
        let k_lo = ((lo - p_c) / spacing - 1e-9).ceil() as i64;
        let k_hi = ((hi - p_c) / spacing + 1e-9).floor() as i64;
        let mut grid: Vec<f64> = (k_lo..=k_hi).map(|k| p_c + k as f64 * spacing).collect();
        if direction == Direction::FromArea {
            grid.reverse();
        }
        grid
    }
}

/// Quantities recorded along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Entropy of the interval `[0, |A|)`.
    SRegion(usize),
    SHalf,
    I3,
    /// Entropy of the ancilla qubit.
    SQ,
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::SRegion(_) => "S_region",
            Observable::SHalf => "S_half",
            Observable::I3 => "I3",
            Observable::SQ => "S_Q",
        }
    }

    /// Size of the region the observable refers to in an `L`-site chain.
    pub fn region_size(&self, l: usize) -> usize {
        match *self {
            Observable::SRegion(a) => a,
            Observable::SHalf => l / 2,
            Observable::I3 => l / 4,
            Observable::SQ => 1,
        }
    }

    pub fn from_name(name: &str, region_size: usize) -> Option<Self> {
        Some(match name {
            "S_region" => Observable::SRegion(region_size),
            "S_half" => Observable::SHalf,
            "I3" => Observable::I3,
            "S_Q" => Observable::SQ,
            _ => return None,
        })
    }

    fn check(&self, l: usize) -> Result<(), ProtocolError> {
        match *self {
            Observable::SRegion(a) if a == 0 || a > l / 2 => Err(ProtocolError::Config(format!(
                "region size {a} must lie in [1, L/2 = {}]",
                l / 2
            ))),
            Observable::I3 if !l.is_multiple_of(4) => {
                Err(ProtocolError::Config(format!("I3 needs L divisible by 4, got {l}")))
            }
            _ => Ok(()),
        }
    }
}

/// How the initial state of a driven trajectory is prepared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialVariant {
    /// Steady state at the ramp's `p0`.
    #[default]
    Steady,
    /// Steady state at `p_start`, then the same ramp law continued from there.
    RampFrom { p_start: f64 },
    /// Steady state at `p_prepare`, then the ramp starts abruptly at `p0`.
    QuenchFrom { p_prepare: f64 },
}

/// Where along a trajectory observables are recorded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum SamplePlan {
    /// Ramp sampling: each `p` value is recorded the first time the drive reaches it.
    PGrid(Vec<f64>),
    /// Constant-`p` sampling at times (in units) after preparation.
    TimeGrid(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub p: f64,
    pub g: f64,
    pub values: Vec<(Observable, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub half_step: usize,
    pub site: usize,
    pub outcome: MeasurementOutcome,
}

/// Everything needed to run one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySpec {
    pub config: CircuitConfig,
    pub schedule: DrivingSchedule,
    pub observables: Vec<Observable>,
    pub plan: SamplePlan,
    pub t_eq: usize,
    pub variant: InitialVariant,
    /// Reference `p_c` for `g = p − p_c` on constant schedules.
    pub p_c: f64,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        self.config.validate()?;
        self.schedule.validate()?;
        if self.t_eq == 0 {
            return Err(ProtocolError::Config("equilibration time must be at least 1".into()));
        }
        for o in &self.observables {
            o.check(self.config.l)?;
        }
        match (&self.schedule, &self.plan, self.variant) {
            (DrivingSchedule::Constant { .. }, SamplePlan::TimeGrid(times), InitialVariant::Steady) => {
                if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                    return Err(ProtocolError::Config("sample times must be non-negative".into()));
                }
                Ok(())
            }
            (DrivingSchedule::Constant { .. }, _, _) => Err(ProtocolError::Config(
                "constant schedules take a time grid and the steady initial variant".into(),
            )),
            (DrivingSchedule::LinearRamp { p0, p_end, .. }, SamplePlan::PGrid(grid), variant) => {
                let (lo, hi) = (p0.min(*p_end), p0.max(*p_end));
                if let Some(p) = grid.iter().find(|p| **p < lo - 1e-9 || **p > hi + 1e-9) {
                    return Err(ProtocolError::Config(format!(
                        "sample point {p} outside the ramp window [{lo}, {hi}]"
                    )));
                }
                match variant {
                    InitialVariant::Steady => Ok(()),
                    InitialVariant::RampFrom { p_start } => self.schedule.started_at(p_start).map(|_| ()),
                    InitialVariant::QuenchFrom { p_prepare } => check_probability(p_prepare),
                }
            }
            (DrivingSchedule::LinearRamp { .. }, _, _) => {
                Err(ProtocolError::Config("ramps are sampled on a p grid".into()))
            }
        }
    }

    fn needs_ancilla(&self) -> bool {
        self.observables.contains(&Observable::SQ)
    }
}

fn measurement_layer<R: Rng + ?Sized>(
    state: &mut Tableau,
    l: usize,
    p: f64,
    half_step: usize,
    rng: &mut R,
    log: &mut Option<&mut Vec<MeasurementRecord>>,
) -> Result<(), ProtocolError> {
    for q in 0..l {
        if rng.random::<f64>() < p {
            let outcome = state.measure_z(q, rng)?;
            if let Some(log) = log.as_deref_mut() {
                log.push(MeasurementRecord {
                    half_step,
                    site: q,
                    outcome,
                });
            }
        }
    }
    Ok(())
}

fn unitary_layer<R: Rng + ?Sized>(
    state: &mut Tableau,
    l: usize,
    half_step: usize,
    rng: &mut R,
) -> Result<(), ProtocolError> {
    let offset = half_step % 2;
    for k in 0..l / 2 {
        let a = 2 * k + offset;
        let b = (a + 1) % l;
        state.apply_two_qubit_clifford(sample_uniform_2q(rng), a, b)?;
    }
    Ok(())
}

/// One half-step (gate layer plus measurement layer) at probability `p`.
///
/// Even `half_step` indices use bonds `(2k, 2k+1)`; odd ones use
/// `(2k+1, 2k+2 mod L)`. Only the first `L` qubits take part.
pub fn evolve_half_step<R: Rng + ?Sized>(
    state: &mut Tableau,
    config: &CircuitConfig,
    half_step: usize,
    p: f64,
    rng: &mut R,
    mut log: Option<&mut Vec<MeasurementRecord>>,
) -> Result<(), ProtocolError> {
    check_probability(p)?;
    let l = config.l;
    if state.n_qubits() < l {
        return Err(ProtocolError::Config(format!(
            "state has {} qubits, circuit needs {l}",
            state.n_qubits()
        )));
    }
    match config.layer_order {
        LayerOrder::UnitaryFirst => {
            unitary_layer(state, l, half_step, rng)?;
            measurement_layer(state, l, p, half_step, rng, &mut log)?;
        }
        LayerOrder::MeasurementFirst => {
            measurement_layer(state, l, p, half_step, rng, &mut log)?;
            unitary_layer(state, l, half_step, rng)?;
        }
    }
    Ok(())
}

/// Two half-steps starting at time `t`, measured at `p_at(t)` and `p_at(t + 1/2)`.
pub fn evolve_one_time_unit<R: Rng + ?Sized>(
    state: &mut Tableau,
    config: &CircuitConfig,
    t: f64,
    p_at: impl Fn(f64) -> f64,
    rng: &mut R,
) -> Result<(), ProtocolError> {
    let (pa, pb) = (p_at(t), p_at(t + 0.5));
    check_probability(pa)?;
    check_probability(pb)?;
    evolve_half_step(state, config, 0, pa, rng, None)?;
    evolve_half_step(state, config, 1, pb, rng, None)
}

/// Evolves `|0…0⟩` for `t_eq` time units at constant `p0`.
pub fn prepare_steady_state<R: Rng + ?Sized>(
    config: &CircuitConfig,
    p0: f64,
    t_eq: usize,
    rng: &mut R,
) -> Result<Tableau, ProtocolError> {
    prepare_logged(config, p0, t_eq, rng, None)
}

fn prepare_logged<R: Rng + ?Sized>(
    config: &CircuitConfig,
    p0: f64,
    t_eq: usize,
    rng: &mut R,
    mut log: Option<&mut Vec<MeasurementRecord>>,
) -> Result<Tableau, ProtocolError> {
    config.validate()?;
    check_probability(p0)?;
    if t_eq == 0 {
        return Err(ProtocolError::Config("equilibration time must be at least 1".into()));
    }
    let mut state = Tableau::new_zero_state(config.l)?;
    for h in 0..2 * t_eq {
        evolve_half_step(&mut state, config, h, p0, rng, log.as_deref_mut())?;
    }
    Ok(state)
}

/// Appends an ancilla in `|0⟩` and entangles it maximally with `site`.
///
/// Uses H on the ancilla and CNOT(ancilla → site), or a controlled-Z if the
/// site is an X eigenstate. Deterministic: no randomness is consumed.
pub fn attach_ancilla(state: &Tableau, site: usize) -> Result<Tableau, ProtocolError> {
    if site >= state.n_qubits() {
        return Err(ProtocolError::Config(format!(
            "ancilla site {site} outside a register of {}",
            state.n_qubits()
        )));
    }
    let mut t = state.with_extra_qubit();
    let anc = t.n_qubits() - 1;
    t.apply_fixture_gate(FixtureGate::H(anc))?;
    // Controlled-Z (H·CNOT·H on the site) when ±X on the site is a stabilizer.
    t.apply_fixture_gate(FixtureGate::H(site))?;
    let x_fixed = t.deterministic_z(site)?.is_some();
    if !x_fixed {
        t.apply_fixture_gate(FixtureGate::H(site))?;
    }
    t.apply_fixture_gate(FixtureGate::Cnot {
        control: anc,
        target: site,
    })?;
    if x_fixed {
        t.apply_fixture_gate(FixtureGate::H(site))?;
    }
    Ok(t)
}

fn evaluate(state: &Tableau, l: usize, obs: Observable) -> Result<f64, ProtocolError> {
    Ok(match obs {
        Observable::SRegion(a) => entanglement_entropy(state, &Region::interval(0, a, l)?)? as f64,
        Observable::SHalf => half_chain_entropy_of(state, l)? as f64,
        Observable::I3 => tripartite_mutual_information_of(state, l)? as f64,
        Observable::SQ => {
            if state.n_qubits() <= l {
                return Err(ProtocolError::Config("S_Q requested without an ancilla".into()));
            }
            ancilla_entropy(state, l)? as f64
        }
    })
}

fn sample(state: &Tableau, spec: &TrajectorySpec, t: f64, p: f64, p_c: f64) -> Result<TrajectorySample, ProtocolError> {
    let values = spec
        .observables
        .iter()
        .map(|&o| evaluate(state, spec.config.l, o).map(|v| (o, v)))
        .collect::<Result<_, _>>()?;
    Ok(TrajectorySample {
        t,
        p,
        g: p - p_c,
        values,
    })
}

/// Runs one trajectory and returns its samples in time order.
pub fn run_trajectory<R: Rng + ?Sized>(
    spec: &TrajectorySpec,
    rng: &mut R,
) -> Result<Vec<TrajectorySample>, ProtocolError> {
    run(spec, rng, None)
}

/// Like [`run_trajectory`], also recording every measurement on system qubits.
pub fn run_trajectory_logged<R: Rng + ?Sized>(
    spec: &TrajectorySpec,
    rng: &mut R,
    log: &mut Vec<MeasurementRecord>,
) -> Result<Vec<TrajectorySample>, ProtocolError> {
    run(spec, rng, Some(log))
}

fn run<R: Rng + ?Sized>(
    spec: &TrajectorySpec,
    rng: &mut R,
    mut log: Option<&mut Vec<MeasurementRecord>>,
) -> Result<Vec<TrajectorySample>, ProtocolError> {
    spec.validate()?;
    let (p_prepare, schedule) = match spec.variant {
        InitialVariant::Steady => (spec.schedule.start(), spec.schedule.clone()),
        InitialVariant::RampFrom { p_start } => (p_start, spec.schedule.started_at(p_start)?),
        InitialVariant::QuenchFrom { p_prepare } => (p_prepare, spec.schedule.clone()),
    };
    let mut state = prepare_logged(&spec.config, p_prepare, spec.t_eq, rng, log.as_deref_mut())?;
    if spec.needs_ancilla() {
        state = attach_ancilla(&state, spec.config.ancilla_site())?;
    }
    let p_c = schedule.p_c().unwrap_or(spec.p_c);
    let mut samples = Vec::new();
    let mut half = 0usize;
    match &spec.plan {
        SamplePlan::TimeGrid(times) => {
            let mut times = times.clone();
            times.sort_by(f64::total_cmp);
            let p = schedule.start();
            for t in times {
                let target = (2.0 * t - 1e-9).ceil().max(0.0) as usize;
                while half < target {
                    evolve_half_step(
                        &mut state,
                        &spec.config,
                        2 * spec.t_eq + half,
                        p,
                        rng,
                        log.as_deref_mut(),
                    )?;
                    half += 1;
                }
                samples.push(sample(&state, spec, half as f64 / 2.0, p, p_c)?);
            }
        }
        SamplePlan::PGrid(grid) => {
            let start = schedule.start();
            // Points behind the starting probability are never crossed.
            let pending: Vec<f64> = grid
                .iter()
                .copied()
                .filter(|&g| schedule.reached(g, start) || (g - start).abs() <= CROSSING_EPS)
                .collect();
            let mut next = 0;
            let max_half = 2 * (schedule.t_c().unwrap_or(0.0) * 2.0 + 2.0).ceil() as usize + 4;
            loop {
                let t = half as f64 / 2.0;
                let p_now = schedule.p_at(t);
                let first = next;
                while next < pending.len() && schedule.reached(p_now, pending[next]) {
                    next += 1;
                }
                if next > first {
                    let snap = sample(&state, spec, t, 0.0, p_c)?;
                    for &gp in &pending[first..next] {
                        samples.push(TrajectorySample {
                            t,
                            p: gp,
                            g: gp - p_c,
                            values: snap.values.clone(),
                        });
                    }
                }
                if next == pending.len() {
                    break;
                }
                if half > max_half + ((pending.len() as f64) * 2.0) as usize + 1_000_000 {
                    return Err(ProtocolError::Schedule("ramp never reaches its sample grid".into()));
                }
                evolve_half_step(
                    &mut state,
                    &spec.config,
                    2 * spec.t_eq + half,
                    p_now,
                    rng,
                    log.as_deref_mut(),
                )?;
                half += 1;
            }
        }
    }
    Ok(samples)
}
