//! Reproducibility audit: the same config and seed must give the same bytes.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::config::{load_config, ExperimentConfig, Kind, Overrides};
use crate::{run_config, CliError};

const MINI_TRAJ: usize = 2;

fn files_under(root: &Path) -> Result<BTreeSet<PathBuf>, CliError> {
    let mut out = BTreeSet::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry.map_err(|e| CliError::Runtime(e.to_string()))?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
    }
    Ok(out)
}

/// File bytes, with the wall-clock field of metadata sidecars zeroed.
fn comparable(path: &Path) -> Result<Vec<u8>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    if !path.to_string_lossy().ends_with(".meta.json") {
        return Ok(bytes);
    }
    let Ok(mut v) = serde_json::from_slice::<Value>(&bytes) else {
        return Ok(bytes);
    };
    if let Some(obj) = v.as_object_mut() {
        obj.insert("wall_clock_s".into(), Value::from(0.0));
    }
    Ok(serde_json::to_vec_pretty(&v).expect("json value serializes"))
}

/// Compares two output trees; returns the first difference found.
pub fn diff_trees(a: &Path, b: &Path) -> Result<Option<String>, CliError> {
    let (fa, fb) = (files_under(a)?, files_under(b)?);
    if let Some(f) = fa.symmetric_difference(&fb).next() {
        return Ok(Some(format!("{} present in only one output tree", f.display())));
    }
    for f in &fa {
        let (x, y) = (comparable(&a.join(f))?, comparable(&b.join(f))?);
        if x != y {
            let offset = x
                .iter()
                .zip(&y)
                .position(|(p, q)| p != q)
                .unwrap_or(x.len().min(y.len()));
            return Ok(Some(format!(
                "{}: first difference at byte offset {offset}",
                f.display()
            )));
        }
    }
    Ok(None)
}

fn miniature(cfg: &ExperimentConfig, workers: usize) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.n_traj = MINI_TRAJ;
    c.workers = Some(workers);
    c
}

/// Runs the miniature with one worker and with eight, or once against an
/// existing tree, and fails on the first differing byte.
pub fn cmd_seedcheck(
    config: &Path,
    ov: &Overrides,
    keep: Option<&Path>,
    against: Option<&Path>,
) -> Result<String, CliError> {
    let cfg = load_config(config, ov)?;
    if cfg.kind == Kind::Analyze {
        return Err(CliError::Config("kind: seedcheck needs a simulation config".into()));
    }
    let scratch = tempfile::tempdir().map_err(|e| CliError::Runtime(e.to_string()))?;
    let first = match keep {
        Some(k) => k.to_path_buf(),
        None => scratch.path().join("a"),
    };
    run_config(&miniature(&cfg, 1), &first, |_| {})?;
    let second = match against {
        Some(dir) => dir.to_path_buf(),
        None => {
            let b = scratch.path().join("b");
            run_config(&miniature(&cfg, 8), &b, |_| {})?;
            b
        }
    };
    match diff_trees(&first, &second)? {
        None => Ok(format!(
            "seedcheck ok: {} files identical ({} trajectories each, seed {})",
            files_under(&first)?.len(),
            MINI_TRAJ,
            cfg.master_seed
        )),
        Some(d) => Err(CliError::Runtime(format!("seedcheck mismatch: {d}"))),
    }
}
