//! Reproducible trajectory ensembles with ordered mean/sem aggregation.

mod io;

pub use io::{
    read_aggregate, read_metadata, read_trajectories, sidecar_path, trajectories_path, write_aggregate,
    write_trajectories, RunMetadata, COLUMNS,
};

use std::time::Instant;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{
    run_trajectory, CircuitConfig, DrivingSchedule, InitialVariant, Observable, ProtocolError, SamplePlan,
    TrajectorySample, TrajectorySpec, DEFAULT_SAMPLE_SPACING,
};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid run spec: {0}")]
    Spec(String),
    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: ProtocolError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{0}: metadata missing")]
    MetadataMissing(String),
    #[error("{path}: bad metadata: {message}")]
    Metadata { path: String, message: String },
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Observable family named in a run spec; `S_region` is expanded over `regions`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObservableKind {
    #[serde(rename = "S_region")]
    SRegion,
    #[serde(rename = "S_half")]
    SHalf,
    I3,
    #[serde(rename = "S_Q")]
    SQ,
}

/// How sample points are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleGrid {
    /// Ramp grid `p_c + kΔ` over the ramp window.
    Spacing(f64),
    /// Explicit `p` values for ramps.
    PValues(Vec<f64>),
    /// Sample times after preparation for constant schedules.
    Times(Vec<f64>),
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid::Spacing(DEFAULT_SAMPLE_SPACING)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub config: CircuitConfig,
    pub schedule: DrivingSchedule,
    pub observables: Vec<ObservableKind>,
    #[serde(default)]
    pub regions: Vec<usize>,
    pub n_traj: usize,
    pub master_seed: u64,
    pub t_eq: usize,
    #[serde(default)]
    pub initial_variant: InitialVariant,
    #[serde(default)]
    pub sample_grid: SampleGrid,
    /// Reference critical point for `g` on constant schedules.
    pub p_c: f64,
    /// Keep every trajectory's samples alongside the aggregate.
    #[serde(default)]
    pub keep_trajectories: bool,
}

impl RunSpec {
    /// Expanded observable list in output order.
    pub fn observable_list(&self) -> Vec<Observable> {
        let mut out = Vec::new();
        for kind in &self.observables {
            match kind {
                ObservableKind::SRegion => out.extend(self.regions.iter().map(|&a| Observable::SRegion(a))),
                ObservableKind::SHalf => out.push(Observable::SHalf),
                ObservableKind::I3 => out.push(Observable::I3),
                ObservableKind::SQ => out.push(Observable::SQ),
            }
        }
        out
    }

    pub fn plan(&self) -> SamplePlan {
        match &self.sample_grid {
            SampleGrid::Spacing(d) => SamplePlan::PGrid(self.schedule.sample_grid(*d)),
            SampleGrid::PValues(v) => SamplePlan::PGrid(v.clone()),
            SampleGrid::Times(v) => SamplePlan::TimeGrid(v.clone()),
        }
    }

    pub fn trajectory_spec(&self) -> TrajectorySpec {
        TrajectorySpec {
            config: self.config.clone(),
            schedule: self.schedule.clone(),
            observables: self.observable_list(),
            plan: self.plan(),
            t_eq: self.t_eq,
            variant: self.initial_variant,
            p_c: self.p_c,
        }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.n_traj == 0 {
            return Err(EnsembleError::Spec("n_traj must be at least 1".into()));
        }
        if self.observables.is_empty() {
            return Err(EnsembleError::Spec("no observables requested".into()));
        }
        if self.observables.contains(&ObservableKind::SRegion) && self.regions.is_empty() {
            return Err(EnsembleError::Spec("S_region requested without regions".into()));
        }
        if let Some(&a) = self.regions.iter().find(|&&a| a == 0 || a > self.config.l / 2) {
            return Err(EnsembleError::Spec(format!(
                "region size {a} outside [1, L/2 = {}]",
                self.config.l / 2
            )));
        }
        if let SampleGrid::Spacing(d) = self.sample_grid {
            if !(d > 0.0 && d.is_finite()) {
                return Err(EnsembleError::Spec(format!("sample spacing must be positive, got {d}")));
            }
        }
        self.trajectory_spec()
            .validate()
            .map_err(|e| EnsembleError::Spec(e.to_string()))
    }
}

/// Mean and standard error at one sample point for one observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub t: f64,
    pub p: f64,
    pub g: f64,
    pub observable: Observable,
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleAggregate {
    pub spec: RunSpec,
    /// Rows ordered by sample point, then by observable in spec order.
    pub points: Vec<AggregatePoint>,
    pub wall_clock_s: f64,
    pub trajectories: Option<Vec<Vec<TrajectorySample>>>,
}

impl EnsembleAggregate {
    /// Points of one observable, in sample order.
    pub fn series(&self, obs: Observable) -> Vec<&AggregatePoint> {
        self.points.iter().filter(|pt| pt.observable == obs).collect()
    }

    /// The point of `obs` sampled closest to probability `p`.
    pub fn at_p(&self, obs: Observable, p: f64) -> Option<&AggregatePoint> {
        self.series(obs)
            .into_iter()
            .min_by(|a, b| (a.p - p).abs().total_cmp(&(b.p - p).abs()))
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` under `master_seed`.
///
/// For a fixed master seed the map is a bijection of the index, and for a
/// fixed index a bijection of the master seed, so neither direction collides.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    mix64(mix64(master_seed) ^ index.wrapping_mul(GOLDEN))
}

pub fn trajectory_rng(master_seed: u64, index: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(trajectory_seed(master_seed, index))
}

/// Runs the ensemble on `workers` threads (all cores when `None`).
///
/// The output does not depend on the worker count.
pub fn run_ensemble(spec: &RunSpec, workers: Option<usize>) -> Result<EnsembleAggregate, EnsembleError> {
    spec.validate()?;
    let started = Instant::now();
    let tspec = spec.trajectory_spec();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| EnsembleError::Pool(e.to_string()))?;
    let results: Vec<Result<Vec<TrajectorySample>, ProtocolError>> = pool.install(|| {
        (0..spec.n_traj)
            .into_par_iter()
            .map(|i| run_trajectory(&tspec, &mut trajectory_rng(spec.master_seed, i as u64)))
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        runs.push(r.map_err(|source| EnsembleError::Trajectory { index, source })?);
    }
    let points = aggregate(&runs)?;
    Ok(EnsembleAggregate {
        spec: spec.clone(),
        points,
        wall_clock_s: started.elapsed().as_secs_f64(),
        trajectories: spec.keep_trajectories.then_some(runs),
    })
}

/// Ordered reduction of per-trajectory samples into mean and sem.
pub fn aggregate(runs: &[Vec<TrajectorySample>]) -> Result<Vec<AggregatePoint>, EnsembleError> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    for (i, r) in runs.iter().enumerate() {
        let same = r.len() == first.len()
            && r.iter()
                .zip(first)
                .all(|(a, b)| a.t == b.t && a.p == b.p && a.values.len() == b.values.len());
        if !same {
            return Err(EnsembleError::Spec(format!(
                "trajectory {i} sampled different points than trajectory 0"
            )));
        }
    }
    let n = runs.len();
    let mut out = Vec::new();
    for (k, s0) in first.iter().enumerate() {
        for (j, &(obs, _)) in s0.values.iter().enumerate() {
            // Welford update, trajectory-index order.
            let (mut mean, mut m2) = (0.0f64, 0.0f64);
            for (c, r) in runs.iter().enumerate() {
                let x = r[k].values[j].1;
                let d = x - mean;
                mean += d / (c + 1) as f64;
                m2 += d * (x - mean);
            }
            let sem = if n > 1 {
                (m2 / (n - 1) as f64 / n as f64).sqrt()
            } else {
                0.0
            };
            out.push(AggregatePoint {
                t: s0.t,
                p: s0.p,
                g: s0.g,
                observable: obs,
                mean,
                sem,
                n,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Direction;
    use std::collections::HashSet;

    const P_C: f64 = 0.15995;

    fn ramp_spec(n_traj: usize) -> RunSpec {
        RunSpec {
            config: CircuitConfig::new(16).unwrap(),
            schedule: DrivingSchedule::ramp(P_C, 0.30995, 0.04, Direction::FromArea, None).unwrap(),
            observables: vec![ObservableKind::SRegion, ObservableKind::SHalf],
            regions: vec![2, 4],
            n_traj,
            master_seed: 17,
            t_eq: 8,
            initial_variant: InitialVariant::Steady,
            sample_grid: SampleGrid::Spacing(0.01),
            p_c: P_C,
            keep_trajectories: false,
        }
    }

    #[test]
    fn seed_mixing_is_deterministic_and_collision_free() {
        assert_eq!(trajectory_seed(3, 9), trajectory_seed(3, 9));
        let mut seen = HashSet::with_capacity(1 << 20);
        for i in 0..1_000_000u64 {
            assert!(seen.insert(trajectory_seed(12345, i)));
        }
        let mut grid = HashSet::new();
        for s in 0..1000u64 {
            for i in 0..1000u64 {
                grid.insert((i, trajectory_seed(s, i)));
            }
        }
        assert_eq!(grid.len(), 1_000_000);
    }

    #[test]
    fn single_trajectory_has_zero_sem() {
        let spec = ramp_spec(1);
        let agg = run_ensemble(&spec, Some(1)).unwrap();
        let single = run_trajectory(&spec.trajectory_spec(), &mut trajectory_rng(17, 0)).unwrap();
        let obs = spec.observable_list();
        assert_eq!(agg.points.len(), single.len() * obs.len());
        for (pt, (s, v)) in agg
            .points
            .iter()
            .zip(single.iter().flat_map(|s| s.values.iter().map(move |v| (s, v))))
        {
            assert_eq!(pt.mean, v.1);
            assert_eq!(pt.sem, 0.0);
            assert_eq!(pt.t, s.t);
            assert_eq!(pt.n, 1);
        }
    }

    #[test]
    fn full_measurement_has_zero_entropy() {
        let mut spec = ramp_spec(20);
        spec.schedule = DrivingSchedule::constant(1.0).unwrap();
        spec.sample_grid = SampleGrid::Times(vec![1.0, 2.0]);
        let agg = run_ensemble(&spec, Some(2)).unwrap();
        assert!(agg.points.iter().all(|p| p.mean == 0.0 && p.sem == 0.0 && p.n == 20));
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let spec = ramp_spec(24);
        let a = run_ensemble(&spec, Some(1)).unwrap();
        let b = run_ensemble(&spec, Some(8)).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn spec_validation() {
        let mut s = ramp_spec(0);
        assert!(matches!(run_ensemble(&s, Some(1)), Err(EnsembleError::Spec(_))));
        s.n_traj = 2;
        s.regions = vec![9];
        assert!(s.validate().is_err());
        s.regions = vec![];
        assert!(s.validate().is_err());
        s.observables = vec![ObservableKind::I3];
        s.config = CircuitConfig::new(18).unwrap();
        assert!(s.validate().is_err());
    }

    #[test]
    fn kept_trajectories_match_aggregate() {
        let mut spec = ramp_spec(5);
        spec.keep_trajectories = true;
        let agg = run_ensemble(&spec, Some(1)).unwrap();
        let runs = agg.trajectories.as_ref().unwrap();
        assert_eq!(aggregate(runs).unwrap(), agg.points);
    }

    #[test]
    fn run_spec_json_round_trip() {
        let spec = ramp_spec(3);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<RunSpec>(&json).unwrap(), spec);
        let bad = json.replacen("\"n_traj\"", "\"ntraj\"", 1);
        assert!(serde_json::from_str::<RunSpec>(&bad).is_err());
    }
}
