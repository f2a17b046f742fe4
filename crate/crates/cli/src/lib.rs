//! Command-line front end: runs ensembles from JSON experiment configs,
//! analyzes their CSV output and audits reproducibility.

pub mod analyze;
pub mod config;
pub mod seedcheck;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mipt_core::analysis::ScalingConstants;
use mipt_core::ensemble::{run_ensemble, write_aggregate};

use crate::config::{load_config, Kind, Overrides};

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or input schema (exit 2).
    Config(String),
    /// Failure while running or fitting (exit 1).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "mipt", version, about = "Driven measurement-induced transition experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the ensembles described by a config file.
    Run(RunArgs),
    /// Rescale, collapse or fit aggregate CSV files.
    Analyze(AnalyzeArgs),
    /// Run a two-trajectory miniature twice and compare the outputs byte for byte.
    Seedcheck(SeedcheckArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Apply the config's paper_scale override block.
    #[arg(long)]
    pub paper_scale: bool,
    /// Override a config key, e.g. `--set n_traj=200` or `--set constants.nu=1.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            workers: self.workers,
            paper_scale: self.paper_scale,
            set: self.set.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Aggregate CSV glob; repeatable.
    #[arg(long = "input", value_name = "GLOB")]
    pub inputs: Vec<String>,
    /// BULK, VELOCITY, SIZE, DIMENSIONLESS, STEADY, PC_VELOCITY, fit_log,
    /// fit_power_log or fit_steady_alpha.
    #[arg(long)]
    pub mode: String,
    #[arg(long)]
    pub observable: Option<String>,
    #[arg(long)]
    pub region: Option<usize>,
    /// Probability at which fits slice the ramps (default p_c).
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_name = "LO,HI")]
    pub window: Option<String>,
    /// log or power.
    #[arg(long)]
    pub asymptote: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub p_c: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SeedcheckArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Keep the first miniature's output here.
    #[arg(long)]
    pub keep: Option<PathBuf>,
    /// Compare a fresh miniature against this existing output tree instead.
    #[arg(long)]
    pub against: Option<PathBuf>,
}

/// Runs every ensemble of the config and returns one summary line each.
pub fn cmd_run(config: &Path, out: &Path, ov: &Overrides) -> Result<Vec<String>, CliError> {
    let cfg = load_config(config, ov)?;
    if cfg.kind == Kind::Analyze {
        let a = cfg.analysis.as_ref().expect("validated");
        return analyze::cmd_analyze(a, &cfg.constants, out).map(|s| vec![s]);
    }
    run_config(&cfg, out, |line| println!("{line}"))
}

/// Runs every ensemble of an already loaded config, passing each summary line to `report`.
pub fn run_config(
    cfg: &config::ExperimentConfig,
    out: &Path,
    mut report: impl FnMut(&str),
) -> Result<Vec<String>, CliError> {
    let dir = out.join(cfg.kind.dir());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    let mut lines = Vec::new();
    for run in cfg.plan()? {
        let agg = run_ensemble(&run.spec, cfg.workers).map_err(|e| CliError::Runtime(format!("{}: {e}", run.label)))?;
        let path = dir.join(format!("{}.csv", run.label));
        write_aggregate(&agg, &path).map_err(|e| CliError::Runtime(e.to_string()))?;
        let n_obs = run.spec.observable_list().len();
        let line = format!(
            "{}/{}: {} rows ({} observables), n_traj={}, {:.1} s",
            cfg.kind.dir(),
            run.label,
            agg.points.len(),
            n_obs,
            run.spec.n_traj,
            agg.wall_clock_s
        );
        report(&line);
        lines.push(line);
    }
    Ok(lines)
}

fn analyze_from_args(a: &AnalyzeArgs) -> Result<String, CliError> {
    let mut constants = ScalingConstants::default();
    if let Some(v) = a.p_c {
        constants.p_c = v;
    }
    if let Some(v) = a.nu {
        constants.nu = v;
    }
    if let Some(v) = a.z {
        constants.z = v;
    }
    if let Some(v) = a.alpha {
        constants.alpha = v;
    }
    let window = match &a.window {
        None => None,
        Some(w) => {
            let parsed = w
                .split_once(',')
                .and_then(|(lo, hi)| Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?)));
            Some(parsed.ok_or_else(|| CliError::Config(format!("--window expects LO,HI, got {w:?}")))?)
        }
    };
    let cfg = config::AnalysisConfig {
        inputs: a.inputs.clone(),
        mode: a.mode.clone(),
        observable: a.observable.clone(),
        region_size: a.region,
        p: a.p,
        window,
        asymptote: a.asymptote.clone(),
    };
    analyze::cmd_analyze(&cfg, &constants, &a.out)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(r) => cmd_run(&r.config.config, &r.out, &r.config.overrides()).map(|_| ()),
        Command::Analyze(a) => analyze_from_args(a).map(|line| println!("{line}")),
        Command::Seedcheck(s) => seedcheck::cmd_seedcheck(
            &s.config.config,
            &s.config.overrides(),
            s.keep.as_deref(),
            s.against.as_deref(),
        )
        .map(|line| println!("{line}")),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
