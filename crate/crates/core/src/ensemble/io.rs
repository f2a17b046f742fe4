//! CSV persistence of aggregates with a JSON metadata sidecar.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AggregatePoint, EnsembleAggregate, EnsembleError, RunSpec};
use crate::protocol::{Observable, TrajectorySample};

pub const COLUMNS: [&str; 8] = ["t", "p", "g", "observable", "region_size", "mean", "sem", "n_traj"];
const TRAJ_COLUMNS: [&str; 7] = ["trajectory", "t", "p", "g", "observable", "region_size", "value"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetadata {
    pub run_spec: RunSpec,
    pub code_version: String,
    pub wall_clock_s: f64,
}

/// `dir/name.csv` → `dir/name.meta.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// `dir/name.csv` → `dir/name.trajectories.csv`.
pub fn trajectories_path(csv: &Path) -> PathBuf {
    csv.with_extension("trajectories.csv")
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EnsembleError + '_ {
    move |source| EnsembleError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> EnsembleError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => EnsembleError::Io {
            path: path.display().to_string(),
            source,
        },
        kind => EnsembleError::Parse {
            path: path.display().to_string(),
            line,
            column: String::new(),
            message: format!("{kind:?}"),
        },
    }
}

/// Writes the CSV and its `.meta.json` sidecar (and per-trajectory dump if kept).
pub fn write_aggregate(agg: &EnsembleAggregate, path: &Path) -> Result<(), EnsembleError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(COLUMNS).map_err(|e| csv_err(path, e))?;
    let l = agg.spec.config.l;
    for pt in &agg.points {
        w.write_record([
            fmt(pt.t),
            fmt(pt.p),
            fmt(pt.g),
            pt.observable.name().to_string(),
            pt.observable.region_size(l).to_string(),
            fmt(pt.mean),
            fmt(pt.sem),
            pt.n.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))?;
    let meta = RunMetadata {
        run_spec: agg.spec.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_s: agg.wall_clock_s,
    };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("run metadata serializes");
    std::fs::write(&side, json + "\n").map_err(io_err(&side))?;
    if let Some(runs) = &agg.trajectories {
        write_trajectories(runs, l, &trajectories_path(path))?;
    }
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<RunMetadata, EnsembleError> {
    let side = sidecar_path(path);
    let text = match std::fs::read_to_string(&side) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(EnsembleError::MetadataMissing(side.display().to_string()))
        }
        Err(e) => return Err(io_err(&side)(e)),
    };
    serde_json::from_str(&text).map_err(|e| EnsembleError::Metadata {
        path: side.display().to_string(),
        message: e.to_string(),
    })
}

struct Row<'a> {
    path: &'a Path,
    line: u64,
    rec: &'a csv::StringRecord,
    header: &'a [&'a str],
}

impl Row<'_> {
    fn field<T: FromStr>(&self, i: usize) -> Result<T, EnsembleError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.rec.get(i).unwrap_or("");
        raw.trim().parse().map_err(|e: T::Err| EnsembleError::Parse {
            path: self.path.display().to_string(),
            line: self.line,
            column: self.header[i].to_string(),
            message: format!("cannot parse {raw:?}: {e}"),
        })
    }

    fn observable(&self, name_col: usize) -> Result<Observable, EnsembleError> {
        let size: usize = self.field(name_col + 1)?;
        let name = self.rec.get(name_col).unwrap_or("");
        Observable::from_name(name, size).ok_or_else(|| EnsembleError::Parse {
            path: self.path.display().to_string(),
            line: self.line,
            column: self.header[name_col].to_string(),
            message: format!("unknown observable {name:?}"),
        })
    }
}

fn open_checked(path: &Path, header: &[&str]) -> Result<csv::Reader<File>, EnsembleError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let got = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(EnsembleError::Parse {
            path: path.display().to_string(),
            line: 1,
            column: String::new(),
            message: format!(
                "expected header {}, found {}",
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(r)
}

/// Reads a CSV written by [`write_aggregate`]; the sidecar must exist.
pub fn read_aggregate(path: &Path) -> Result<EnsembleAggregate, EnsembleError> {
    let meta = read_metadata(path)?;
    let mut r = open_checked(path, &COLUMNS)?;
    let mut points = Vec::new();
    let mut rec = csv::StringRecord::new();
    loop {
        match r.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_err(path, e)),
        }
        let row = Row {
            path,
            line: rec.position().map_or(0, |p| p.line()),
            rec: &rec,
            header: &COLUMNS,
        };
        points.push(AggregatePoint {
            t: row.field(0)?,
            p: row.field(1)?,
            g: row.field(2)?,
            observable: row.observable(3)?,
            mean: row.field(5)?,
            sem: row.field(6)?,
            n: row.field(7)?,
        });
    }
    let trajectories = if meta.run_spec.keep_trajectories && trajectories_path(path).exists() {
        Some(read_trajectories(&trajectories_path(path))?)
    } else {
        None
    };
    Ok(EnsembleAggregate {
        spec: meta.run_spec,
        points,
        wall_clock_s: meta.wall_clock_s,
        trajectories,
    })
}

pub fn write_trajectories(runs: &[Vec<TrajectorySample>], l: usize, path: &Path) -> Result<(), EnsembleError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(TRAJ_COLUMNS).map_err(|e| csv_err(path, e))?;
    for (i, run) in runs.iter().enumerate() {
        for s in run {
            for (obs, v) in &s.values {
                w.write_record([
                    i.to_string(),
                    fmt(s.t),
                    fmt(s.p),
                    fmt(s.g),
                    obs.name().to_string(),
                    obs.region_size(l).to_string(),
                    fmt(*v),
                ])
                .map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Vec<TrajectorySample>>, EnsembleError> {
    let mut r = open_checked(path, &TRAJ_COLUMNS)?;
    let mut runs: Vec<Vec<TrajectorySample>> = Vec::new();
    let mut rec = csv::StringRecord::new();
    while r.read_record(&mut rec).map_err(|e| csv_err(path, e))? {
        let row = Row {
            path,
            line: rec.position().map_or(0, |p| p.line()),
            rec: &rec,
            header: &TRAJ_COLUMNS,
        };
        let i: usize = row.field(0)?;
        let (t, p, g): (f64, f64, f64) = (row.field(1)?, row.field(2)?, row.field(3)?);
        let value = (row.observable(4)?, row.field(6)?);
        if i == runs.len() {
            runs.push(Vec::new());
        } else if i + 1 != runs.len() {
            return Err(EnsembleError::Parse {
                path: path.display().to_string(),
                line: row.line,
                column: "trajectory".into(),
                message: format!("trajectory {i} out of order"),
            });
        }
        let run = runs.last_mut().expect("pushed above");
        match run.last_mut() {
            Some(s) if s.t == t && s.p == p => s.values.push(value),
            _ => run.push(TrajectorySample {
                t,
                p,
                g,
                values: vec![value],
            }),
        }
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{run_ensemble, ObservableKind, SampleGrid};
    use crate::protocol::{CircuitConfig, Direction, DrivingSchedule, InitialVariant};

    fn spec() -> RunSpec {
        RunSpec {
            config: CircuitConfig::new(8).unwrap(),
            schedule: DrivingSchedule::ramp(0.15995, 0.00995, 0.05, Direction::FromVolume, None).unwrap(),
            observables: vec![ObservableKind::SHalf, ObservableKind::I3, ObservableKind::SQ],
            regions: vec![],
            n_traj: 6,
            master_seed: 99,
            t_eq: 4,
            initial_variant: InitialVariant::Steady,
            sample_grid: SampleGrid::Spacing(0.02),
            p_c: 0.15995,
            keep_trajectories: true,
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let agg = run_ensemble(&spec(), Some(1)).unwrap();
        write_aggregate(&agg, &path).unwrap();
        assert!(dir.path().join("run.meta.json").exists());
        let back = read_aggregate(&path).unwrap();
        assert_eq!(back, agg);
        for pt in &back.points {
            assert_eq!(pt.g, pt.p - 0.15995);
        }
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(fmt(0.1), "1.0000000000000001e-1");
        for x in [1.0 / 3.0, -2.5e-300, 123456.789, 0.0] {
            assert_eq!(fmt(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn bad_cell_names_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let mut s = spec();
        s.keep_trajectories = false;
        let agg = run_ensemble(&s, Some(1)).unwrap();
        write_aggregate(&agg, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut cells: Vec<String> = lines[2].split(',').map(String::from).collect();
        cells[5] = "abc".into();
        lines[2] = cells.join(",");
        std::fs::write(&path, lines.join("\n")).unwrap();
        match read_aggregate(&path) {
            Err(EnsembleError::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "mean");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let agg = run_ensemble(&spec(), Some(1)).unwrap();
        write_aggregate(&agg, &path).unwrap();
        std::fs::remove_file(sidecar_path(&path)).unwrap();
        let err = read_aggregate(&path).unwrap_err();
        assert!(err.to_string().contains("metadata missing"), "{err}");
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let agg = run_ensemble(&spec(), Some(1)).unwrap();
        write_aggregate(&agg, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap().replacen("mean", "avg", 1);
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            read_aggregate(&path),
            Err(EnsembleError::Parse { line: 1, .. })
        ));
    }
}
