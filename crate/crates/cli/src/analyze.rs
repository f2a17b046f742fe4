//! Analysis front end over aggregate CSV files.

use std::path::{Path, PathBuf};

use mipt_core::analysis::{
    asymptote_check, curve_from_aggregate, fit_log, fit_power_log, fit_steady_alpha, region_slice, rescale_fts,
    steady_curve, velocity_slice, write_curves, AnalysisError, AnalysisReport, AsymptoteForm, Curve, DataPoint,
    FitResult, QualitySummary, RescaleMode, ScalingConstants,
};
use mipt_core::ensemble::{read_aggregate, EnsembleAggregate, EnsembleError};
use mipt_core::protocol::Observable;

use crate::config::AnalysisConfig;
use crate::CliError;

fn expand(patterns: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for pat in patterns {
        let entries = glob::glob(pat).map_err(|e| CliError::Config(format!("bad glob {pat:?}: {e}")))?;
        for entry in entries {
            paths.push(entry.map_err(|e| CliError::Runtime(e.to_string()))?);
        }
    }
    paths.sort();
    paths.dedup();
    if paths.is_empty() {
        return Err(CliError::Config("no inputs".into()));
    }
    Ok(paths)
}

pub fn load_inputs(patterns: &[String]) -> Result<Vec<EnsembleAggregate>, CliError> {
    expand(patterns)?
        .iter()
        .map(|p| {
            read_aggregate(p).map_err(|e| match e {
                EnsembleError::Io { .. } => CliError::Runtime(e.to_string()),
                _ => CliError::Config(e.to_string()),
            })
        })
        .collect()
}

/// Observables of `agg` matching the requested name and region size.
fn pick(agg: &EnsembleAggregate, name: Option<&str>, region: Option<usize>) -> Vec<Observable> {
    let l = agg.spec.config.l;
    let all = agg.spec.observable_list();
    let name = name
        .map(str::to_string)
        .or_else(|| all.first().map(|o| o.name().to_string()));
    all.into_iter()
        .filter(|o| name.as_deref() == Some(o.name()))
        .filter(|o| region.is_none_or(|a| o.region_size(l) == a))
        .collect()
}

fn one(agg: &EnsembleAggregate, cfg: &AnalysisConfig) -> Result<Observable, CliError> {
    let found = pick(agg, cfg.observable.as_deref(), cfg.region_size);
    match found.as_slice() {
        [o] => Ok(*o),
        [] => Err(CliError::Config(format!(
            "input with L = {} has no matching observable {:?}",
            agg.spec.config.l, cfg.observable
        ))),
        _ => Err(CliError::Config(
            "several observables match; pass a region size to choose one".into(),
        )),
    }
}

fn input_err(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::NoConvergence(_) | AnalysisError::Degenerate(_) => CliError::Runtime(e.to_string()),
        AnalysisError::Io(m) => CliError::Runtime(m),
        _ => CliError::Config(e.to_string()),
    }
}

fn fit_err(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::Io(m) => CliError::Runtime(m),
        other => CliError::Runtime(format!("fit failed: {other}")),
    }
}

fn last_time(agg: &EnsembleAggregate) -> f64 {
    agg.points.iter().map(|p| p.t).fold(f64::NEG_INFINITY, f64::max)
}

/// Curves a rescale mode works on.
pub fn curves_for_mode(
    aggs: &[EnsembleAggregate],
    cfg: &AnalysisConfig,
    mode: RescaleMode,
    p_c: f64,
) -> Result<Vec<Curve>, CliError> {
    let first = aggs.first().ok_or_else(|| CliError::Config("no inputs".into()))?;
    match mode {
        RescaleMode::Steady => pick(first, cfg.observable.as_deref(), cfg.region_size)
            .into_iter()
            .map(|o| steady_curve(aggs, o, last_time(first)).map_err(input_err))
            .collect(),
        RescaleMode::PcVelocity => pick(first, cfg.observable.as_deref(), cfg.region_size)
            .into_iter()
            .map(|o| velocity_slice(aggs, o, cfg.p.unwrap_or(p_c)).map_err(input_err))
            .collect(),
        _ => aggs
            .iter()
            .map(|a| curve_from_aggregate(a, one(a, cfg)?).map_err(input_err))
            .collect(),
    }
}

fn write_report(out: &Path, stem: &str, report: &AnalysisReport, curves: Option<&[Curve]>) -> Result<(), CliError> {
    let dir = out.join("analysis");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    if let Some(c) = curves {
        write_curves(c, &dir.join(format!("{stem}.curves.csv"))).map_err(input_err)?;
    }
    let path = dir.join(format!("{stem}.report.json"));
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&path, json + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn fit_report(mode: &str, constants: &ScalingConstants, f: &FitResult) -> AnalysisReport {
    let mut notes = vec![format!(
        "{} points, rss {:.6e}, relative residual {:.4}",
        f.n_points, f.rss, f.relative_residual
    )];
    if f.flagged {
        notes.push("relative residual above threshold: the model describes the data poorly".into());
    }
    AnalysisReport {
        mode: mode.into(),
        constants: *constants,
        quality: None,
        parameters: f.parameters.clone(),
        window: Some(f.window),
        notes,
    }
}

fn describe(f: &FitResult) -> String {
    f.parameters
        .iter()
        .map(|p| format!("{} = {:.5} ± {:.5}", p.name, p.value, p.sigma))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Runs one analysis and returns its summary line.
pub fn cmd_analyze(cfg: &AnalysisConfig, constants: &ScalingConstants, out: &Path) -> Result<String, CliError> {
    constants.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let aggs = load_inputs(&cfg.inputs)?;
    let p_c = constants.p_c;
    match cfg.mode.as_str() {
        "fit_log" | "fit_power_log" => {
            let obs = one(&aggs[0], cfg)?;
            let slice = velocity_slice(&aggs, obs, cfg.p.unwrap_or(p_c)).map_err(input_err)?;
            let pts: Vec<DataPoint> = (&slice).into();
            let f = if cfg.mode == "fit_log" {
                fit_log(&pts, cfg.window)
            } else {
                fit_power_log(&pts, cfg.window)
            }
            .map_err(fit_err)?;
            write_report(out, &cfg.mode, &fit_report(&cfg.mode, constants, &f), Some(&[slice]))?;
            Ok(format!("{}: {} over window {:?}", cfg.mode, describe(&f), f.window))
        }
        "fit_steady_alpha" => {
            let mut pts = Vec::new();
            let mut curves = Vec::new();
            for a in &aggs {
                let c = region_slice(a, last_time(a)).map_err(input_err)?;
                pts.extend(c.points.iter().map(DataPoint::from));
                curves.push(c);
            }
            let f = fit_steady_alpha(&pts).map_err(fit_err)?;
            write_report(out, &cfg.mode, &fit_report(&cfg.mode, constants, &f), Some(&curves))?;
            Ok(format!(
                "fit_steady_alpha: {}{}",
                describe(&f),
                if f.flagged { " (flagged)" } else { "" }
            ))
        }
        name => {
            let mode =
                RescaleMode::parse(name).ok_or_else(|| CliError::Config(format!("mode: unknown mode {name:?}")))?;
            let curves = curves_for_mode(&aggs, cfg, mode, p_c)?;
            let res = rescale_fts(&curves, constants, mode).map_err(input_err)?;
            let mut report = AnalysisReport {
                mode: mode.name().into(),
                constants: *constants,
                quality: Some(QualitySummary {
                    before: res.quality_before.unwrap_or(f64::NAN),
                    after: res.quality,
                }),
                parameters: Vec::new(),
                window: None,
                notes: Vec::new(),
            };
            let mut line = format!(
                "{}: {} curves, quality {:.4} before, {:.4} after",
                mode.name(),
                curves.len(),
                report.quality.unwrap().before,
                res.quality
            );
            if let Some(form) = &cfg.asymptote {
                let form = match form.as_str() {
                    "log" => AsymptoteForm::Log,
                    "power" => AsymptoteForm::Power,
                    other => return Err(CliError::Config(format!("asymptote: unknown form {other:?}"))),
                };
                let f = asymptote_check(&res, form).map_err(fit_err)?;
                report.parameters = f.parameters.clone();
                report.window = Some(f.window);
                line.push_str(&format!("; tail {}", describe(&f)));
            }
            write_report(out, &mode.name().to_lowercase(), &report, Some(&res.curves))?;
            Ok(line)
        }
    }
}
