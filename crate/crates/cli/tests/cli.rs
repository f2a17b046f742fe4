use std::path::{Path, PathBuf};
use std::process::Command;

use mipt_cli::config::{load_config, Overrides};
use mipt_cli::seedcheck::diff_trees;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mipt"))
}

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const RAMP: &str = r#"{
  "kind": "ramp_area", "sizes": [16], "p0": 0.30995,
  "rates": [0.32, 0.16, 0.08, 0.04, 0.02, 0.01],
  "observables": ["S_half"], "n_traj": 6, "master_seed": 5, "t_eq": 8
}"#;

#[test]
fn steady_sweep_writes_one_file_per_probability() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"kind": "steady_sweep", "sizes": [64], "observables": ["S_half"], "n_traj": 100,
            "p_values": [0.10, 0.11, 0.12, 0.13, 0.14, 0.15, 0.16, 0.17, 0.18, 0.19, 0.20, 0.21, 0.22]}"#,
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--set", "n_traj=3", "--set", "t_eq=16"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csvs = std::fs::read_dir(out.join("steady_sweep"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().to_string_lossy().ends_with(".csv"))
        .count();
    assert_eq!(csvs, 13);
    assert_eq!(String::from_utf8_lossy(&status.stdout).lines().count(), 13);
}

#[test]
fn ramp_rates_share_p_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ramp.json", RAMP);
    let out = dir.path().join("out");
    assert_eq!(
        mipt_cli::main_from([
            "mipt",
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    let mut grids = Vec::new();
    for entry in std::fs::read_dir(out.join("ramp_area")).unwrap() {
        let p = entry.unwrap().path();
        if p.to_string_lossy().ends_with(".meta.json") {
            continue;
        }
        let agg = mipt_core::ensemble::read_aggregate(&p).unwrap();
        grids.push(agg.points.iter().map(|pt| pt.p).collect::<Vec<_>>());
    }
    assert_eq!(grids.len(), 6);
    assert!(grids.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn inconsistent_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &RAMP.replace("0.30995", "0.1"));
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p0"));
    let cfg = write(dir.path(), "typo.json", &RAMP.replace("\"t_eq\"", "\"teq\""));
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("teq"));
}

#[test]
fn analyze_velocity_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ramp.json", RAMP);
    let out = dir.path().join("out");
    assert_eq!(
        mipt_cli::main_from([
            "mipt",
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    let glob = format!("{}/ramp_area/*.csv", out.display());
    let o = bin()
        .args(["analyze", "--input", &glob, "--mode", "VELOCITY", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("analysis/velocity.report.json")).unwrap()).unwrap();
    assert!(report["quality"]["before"].is_number());
    assert!(report["quality"]["after"].is_number());
    assert!(out.join("analysis/velocity.curves.csv").exists());

    let o = bin()
        .args(["analyze", "--input", &glob, "--mode", "fit_log", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("analysis/fit_log.report.json")).unwrap()).unwrap();
    assert_eq!(report["parameters"][0]["name"], "delta");
    assert!(report["window"].is_array());

    let o = bin()
        .args([
            "analyze",
            "--input",
            "/nonexistent/*.csv",
            "--mode",
            "VELOCITY",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no inputs"));
}

#[test]
fn analyze_rejects_bad_schema() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "x.csv", "a,b\n1,2\n");
    write(dir.path(), "x.meta.json", "{}");
    let glob = format!("{}/*.csv", dir.path().display());
    let code = mipt_cli::main_from([
        "mipt",
        "analyze",
        "--input",
        &glob,
        "--mode",
        "BULK",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn worker_count_gives_identical_trees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ramp.json", RAMP);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, w) in [(&a, "1"), (&b, "8")] {
        let code = mipt_cli::main_from([
            "mipt",
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            w,
        ]);
        assert_eq!(code, 0);
    }
    assert_eq!(diff_trees(&a, &b).unwrap(), None);
}

#[test]
fn seedcheck_passes_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ramp.json", RAMP);
    let keep = dir.path().join("keep");
    let o = bin()
        .args(["seedcheck", "--config"])
        .arg(&cfg)
        .arg("--keep")
        .arg(&keep)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let target = std::fs::read_dir(keep.join("ramp_area"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "csv"))
        .unwrap();
    let mut bytes = std::fs::read(&target).unwrap();
    let at = bytes.len() - 5;
    bytes[at] = if bytes[at] == b'1' { b'2' } else { b'1' };
    std::fs::write(&target, bytes).unwrap();
    let o = bin()
        .args(["seedcheck", "--config"])
        .arg(&cfg)
        .arg("--against")
        .arg(&keep)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&format!("offset {at}")), "{err}");

    let zero = write(dir.path(), "zero.json", &RAMP.replace("\"n_traj\": 6", "\"n_traj\": 0"));
    let o = bin().args(["seedcheck", "--config"]).arg(&zero).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn presets_load_at_both_scales() {
    for name in ["fig2", "fig3", "fig4", "figS3", "figS4"] {
        let path = presets().join(format!("{name}.json"));
        for paper_scale in [false, true] {
            let ov = Overrides {
                paper_scale,
                ..Default::default()
            };
            let cfg = load_config(&path, &ov).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!cfg.plan().unwrap().is_empty());
        }
    }
    let big = load_config(
        &presets().join("fig2.json"),
        &Overrides {
            paper_scale: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(big.sizes, vec![1024]);
}

#[test]
fn preset_seedcheck() {
    let o = bin()
        .args(["seedcheck", "--config"])
        .arg(presets().join("fig4.json"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
