//! Experiment configuration files and their expansion into run specs.

use std::path::Path;

use mipt_core::analysis::ScalingConstants;
use mipt_core::ensemble::{ObservableKind, RunSpec, SampleGrid};
use mipt_core::protocol::{CircuitConfig, Direction, DrivingSchedule, InitialVariant, LayerOrder};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    SteadySweep,
    RampArea,
    RampVolume,
    AncillaRamp,
    I3Ramp,
    Analyze,
}

impl Kind {
    pub fn dir(self) -> &'static str {
        match self {
            Kind::SteadySweep => "steady_sweep",
            Kind::RampArea => "ramp_area",
            Kind::RampVolume => "ramp_volume",
            Kind::AncillaRamp => "ancilla_ramp",
            Kind::I3Ramp => "i3_ramp",
            Kind::Analyze => "analyze",
        }
    }
}

/// What a fixed drive product `R·X^r` is taken over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductOver {
    /// `R L^r`, one rate per system size.
    #[default]
    Size,
    /// `R |A|^r`, one rate per region.
    Region,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Glob patterns of aggregate CSV files.
    pub inputs: Vec<String>,
    /// A rescale mode name, or `fit_log`, `fit_power_log`, `fit_steady_alpha`.
    pub mode: String,
    #[serde(default)]
    pub observable: Option<String>,
    #[serde(default)]
    pub region_size: Option<usize>,
    /// Probability at which fits slice ramp data; defaults to `p_c`.
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    /// `log` or `power`, checked on the collapsed master curve.
    #[serde(default)]
    pub asymptote: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub layer_order: LayerOrder,
    #[serde(default)]
    pub ancilla_site: Option<usize>,
    #[serde(default)]
    pub constants: ScalingConstants,
    #[serde(default)]
    pub p0: Option<OneOrMany>,
    #[serde(default)]
    pub p_end: Option<f64>,
    #[serde(default)]
    pub rates: Vec<f64>,
    #[serde(default)]
    pub fixed_product: Option<f64>,
    #[serde(default)]
    pub product_over: ProductOver,
    #[serde(default)]
    pub observables: Vec<ObservableKind>,
    #[serde(default)]
    pub regions: Vec<usize>,
    #[serde(default)]
    pub n_traj: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Equilibration time; `2L` when absent.
    #[serde(default)]
    pub t_eq: Option<usize>,
    #[serde(default)]
    pub initial_variant: InitialVariant,
    #[serde(default = "default_spacing")]
    pub sample_spacing: f64,
    #[serde(default)]
    pub p_values: Vec<f64>,
    #[serde(default = "default_times")]
    pub sample_times: Vec<f64>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub keep_trajectories: bool,
    /// Overrides merged in by `--paper-scale`.
    #[serde(default)]
    pub paper_scale: Option<Map<String, Value>>,
    #[serde(default)]
    pub analysis: Option<AnalysisConfig>,
}

fn default_spacing() -> f64 {
    mipt_core::protocol::DEFAULT_SAMPLE_SPACING
}

fn default_times() -> Vec<f64> {
    vec![0.0]
}

/// One ensemble to run and where its output goes.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedRun {
    pub label: String,
    pub spec: RunSpec,
}

/// Command-line adjustments applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub paper_scale: bool,
    pub set: Vec<String>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Sets `a.b.c = value`, creating objects along the way.
fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| config_err(format!("--set {key}: `{}` is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn merge(base: &mut Value, over: &Map<String, Value>) {
    if let Some(obj) = base.as_object_mut() {
        for (k, v) in over {
            match (obj.get_mut(k), v) {
                (Some(b @ Value::Object(_)), Value::Object(o)) => merge(b, o),
                _ => {
                    obj.insert(k.clone(), v.clone());
                }
            }
        }
    }
}

/// Parses a config document and applies overrides in order: paper-scale
/// block, `--set` pairs, then `--seed` and `--workers`.
pub fn load_config_str(text: &str, ov: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| config_err(format!("invalid JSON: {e}")))?;
    if !doc.is_object() {
        return Err(config_err("config must be a JSON object"));
    }
    if ov.paper_scale {
        let block = doc.get("paper_scale").and_then(Value::as_object).cloned();
        match block {
            Some(b) => merge(&mut doc, &b),
            None => return Err(config_err("--paper-scale given but config has no paper_scale block")),
        }
    }
    for kv in &ov.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| config_err(format!("--set expects key=value, got {kv:?}")))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        set_path(&mut doc, k.trim(), value)?;
    }
    if let Some(seed) = ov.seed {
        set_path(&mut doc, "master_seed", Value::from(seed))?;
    }
    if let Some(w) = ov.workers {
        set_path(&mut doc, "workers", Value::from(w))?;
    }
    let cfg: ExperimentConfig = serde_json::from_value(doc).map_err(|e| config_err(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, ov: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    load_config_str(&text, ov)
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x}");
    if s.len() > 10 {
        format!("{x:.6}")
    } else {
        s
    }
}

impl ExperimentConfig {
    fn direction(&self, p0: f64) -> Result<Direction, CliError> {
        let p_c = self.constants.p_c;
        match self.kind {
            Kind::RampArea if p0 <= p_c => Err(config_err(format!(
                "p0: ramp_area starts in the area-law phase and needs p0 > p_c, got p0 = {p0} <= {p_c}"
            ))),
            Kind::RampArea => Ok(Direction::FromArea),
            Kind::RampVolume if p0 >= p_c => Err(config_err(format!(
                "p0: ramp_volume starts in the volume-law phase and needs p0 < p_c, got p0 = {p0} >= {p_c}"
            ))),
            Kind::RampVolume => Ok(Direction::FromVolume),
            _ if p0 > p_c => Ok(Direction::FromArea),
            _ if p0 < p_c => Ok(Direction::FromVolume),
            _ => Err(config_err(format!("p0 = {p0} sits on p_c; no drive direction"))),
        }
    }

    fn observables_for_kind(&self) -> Vec<ObservableKind> {
        let mut obs = self.observables.clone();
        let required = match self.kind {
            Kind::AncillaRamp => Some(ObservableKind::SQ),
            Kind::I3Ramp => Some(ObservableKind::I3),
            _ => None,
        };
        if let Some(r) = required {
            if !obs.contains(&r) {
                obs.push(r);
            }
        }
        obs
    }

    /// Rates paired with each size (or region) of the config.
    fn rates_for(&self, l: usize, region: Option<usize>) -> Vec<f64> {
        match self.fixed_product {
            Some(x) => {
                let base = match (self.product_over, region) {
                    (ProductOver::Region, Some(a)) => a as f64,
                    _ => l as f64,
                };
                vec![x / base.powf(self.constants.r())]
            }
            None => self.rates.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.constants
            .validate()
            .map_err(|e| config_err(format!("constants: {e}")))?;
        if self.kind == Kind::Analyze {
            return match &self.analysis {
                Some(_) => Ok(()),
                None => Err(config_err("analysis: kind analyze needs an analysis block")),
            };
        }
        if self.n_traj == 0 {
            return Err(config_err("n_traj: must be at least 1"));
        }
        if self.sizes.is_empty() {
            return Err(config_err("sizes: at least one system size is required"));
        }
        if self.kind == Kind::SteadySweep {
            if self.p_values.is_empty() {
                return Err(config_err("p_values: steady_sweep needs at least one probability"));
            }
        } else {
            let Some(p0) = &self.p0 else {
                return Err(config_err("p0: ramps need a starting probability"));
            };
            for p in p0.values() {
                self.direction(p)?;
            }
            match (self.fixed_product, self.rates.is_empty()) {
                (Some(_), false) => return Err(config_err("rates: give either rates or fixed_product, not both")),
                (None, true) => return Err(config_err("rates: ramps need rates or a fixed_product")),
                (Some(x), true) if x.is_nan() || x <= 0.0 => return Err(config_err("fixed_product: must be positive")),
                _ => {}
            }
            if self.product_over == ProductOver::Region && self.fixed_product.is_some() && self.regions.is_empty() {
                return Err(config_err("regions: a fixed product over regions needs regions"));
            }
        }
        if self.observables_for_kind().is_empty() {
            return Err(config_err("observables: nothing to record"));
        }
        for run in self.plan()? {
            run.spec
                .validate()
                .map_err(|e| config_err(format!("{}: {e}", run.label)))?;
        }
        Ok(())
    }

    /// Expands the config into one run spec per ensemble.
    pub fn plan(&self) -> Result<Vec<PlannedRun>, CliError> {
        let mut out = Vec::new();
        let observables = self.observables_for_kind();
        for &l in &self.sizes {
            let config = CircuitConfig {
                l,
                layer_order: self.layer_order,
                ancilla_site: self.ancilla_site,
            };
            let t_eq = self.t_eq.unwrap_or(2 * l);
            let base = |schedule, regions: Vec<usize>, grid| RunSpec {
                config: config.clone(),
                schedule,
                observables: observables.clone(),
                regions,
                n_traj: self.n_traj,
                master_seed: self.master_seed,
                t_eq,
                initial_variant: self.initial_variant,
                sample_grid: grid,
                p_c: self.constants.p_c,
                keep_trajectories: self.keep_trajectories,
            };
            if self.kind == Kind::SteadySweep {
                for &p in &self.p_values {
                    let schedule = DrivingSchedule::constant(p).map_err(|e| config_err(format!("p_values: {e}")))?;
                    out.push(PlannedRun {
                        label: format!("L{l}_p{}", fmt_num(p)),
                        spec: base(
                            schedule,
                            self.regions.clone(),
                            SampleGrid::Times(self.sample_times.clone()),
                        ),
                    });
                }
                continue;
            }
            let per_region = self.fixed_product.is_some() && self.product_over == ProductOver::Region;
            let region_sets: Vec<Option<usize>> = if per_region {
                self.regions.iter().map(|&a| Some(a)).collect()
            } else {
                vec![None]
            };
            for p0 in self.p0.as_ref().map(OneOrMany::values).unwrap_or_default() {
                let dir = self.direction(p0)?;
                for region in &region_sets {
                    for rate in self.rates_for(l, *region) {
                        let schedule = DrivingSchedule::ramp(self.constants.p_c, p0, rate, dir, self.p_end)
                            .map_err(|e| config_err(format!("schedule: {e}")))?;
                        let regions = region.map_or_else(|| self.regions.clone(), |a| vec![a]);
                        let mut label = format!("L{l}_p0{}_R{}", fmt_num(p0), fmt_num(rate));
                        if let Some(a) = region {
                            label = format!("L{l}_A{a}_p0{}_R{}", fmt_num(p0), fmt_num(rate));
                        }
                        out.push(PlannedRun {
                            label,
                            spec: base(schedule, regions, SampleGrid::Spacing(self.sample_spacing)),
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}
