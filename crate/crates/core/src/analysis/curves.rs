use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::ensemble::EnsembleAggregate;
use crate::protocol::{Direction, DrivingSchedule, Observable};

/// Parameters held fixed along a curve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveLabel {
    pub rate: Option<f64>,
    pub region_size: Option<usize>,
    pub l: Option<usize>,
    pub p0: Option<f64>,
    pub direction: Option<Direction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub y_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: CurveLabel,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    /// Checks that `x` is strictly monotone and errors are non-negative.
    pub fn new(label: CurveLabel, points: Vec<CurvePoint>) -> Result<Self, AnalysisError> {
        if let Some(pt) = points
            .iter()
            .find(|p| !(p.x.is_finite() && p.y.is_finite() && p.y_err >= 0.0))
        {
            return Err(AnalysisError::Curve(format!("bad point {pt:?}")));
        }
        let up = points.windows(2).all(|w| w[1].x > w[0].x);
        let down = points.windows(2).all(|w| w[1].x < w[0].x);
        if !(up || down) {
            return Err(AnalysisError::Curve("x is not strictly monotone".into()));
        }
        Ok(Self { label, points })
    }

    pub fn from_xy(label: CurveLabel, xy: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, AnalysisError> {
        Self::new(
            label,
            xy.into_iter().map(|(x, y)| CurvePoint { x, y, y_err: 0.0 }).collect(),
        )
    }

    pub fn x_range(&self) -> Option<(f64, f64)> {
        let lo = self.points.iter().map(|p| p.x).reduce(f64::min)?;
        let hi = self.points.iter().map(|p| p.x).reduce(f64::max)?;
        Some((lo, hi))
    }

    /// Linear interpolation inside the support, `None` outside.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let mut pts: Vec<&CurvePoint> = self.points.iter().collect();
        if pts.len() > 1 && pts[0].x > pts[1].x {
            pts.reverse();
        }
        let (first, last) = (pts.first()?, pts.last()?);
        if x < first.x || x > last.x {
            return None;
        }
        let k = pts.partition_point(|p| p.x < x);
        if k < pts.len() && pts[k].x == x {
            return Some(pts[k].y);
        }
        let (a, b) = (pts[k - 1], pts[k]);
        Some(a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x))
    }
}

fn label_of(agg: &EnsembleAggregate, obs: Observable) -> CurveLabel {
    let s = &agg.spec;
    CurveLabel {
        rate: s.schedule.rate(),
        region_size: Some(obs.region_size(s.config.l)),
        l: Some(s.config.l),
        p0: Some(s.schedule.start()),
        direction: s.schedule.direction(),
    }
}

/// One observable of an aggregate as a curve: `x = g` for ramps, `x = t` on
/// constant schedules.
pub fn curve_from_aggregate(agg: &EnsembleAggregate, obs: Observable) -> Result<Curve, AnalysisError> {
    let ramp = matches!(agg.spec.schedule, DrivingSchedule::LinearRamp { .. });
    let points = agg
        .series(obs)
        .into_iter()
        .map(|pt| CurvePoint {
            x: if ramp { pt.g } else { pt.t },
            y: pt.mean,
            y_err: pt.sem,
        })
        .collect::<Vec<_>>();
    if points.is_empty() {
        return Err(AnalysisError::Curve(format!("aggregate has no {} samples", obs.name())));
    }
    Curve::new(label_of(agg, obs), points)
}

/// `S(p, R)` against `R` at the sample `p` closest to `p` across ramp aggregates.
pub fn velocity_slice(aggs: &[EnsembleAggregate], obs: Observable, p: f64) -> Result<Curve, AnalysisError> {
    let mut pts = Vec::new();
    let mut label = None;
    for agg in aggs {
        let rate = agg
            .spec
            .schedule
            .rate()
            .ok_or_else(|| AnalysisError::Curve("velocity slice needs ramp aggregates".into()))?;
        let pt = agg
            .at_p(obs, p)
            .filter(|pt| (pt.p - p).abs() < 1e-9)
            .ok_or_else(|| AnalysisError::Curve(format!("no sample at p = {p} for R = {rate}")))?;
        pts.push(CurvePoint {
            x: rate,
            y: pt.mean,
            y_err: pt.sem,
        });
        label.get_or_insert_with(|| CurveLabel {
            rate: None,
            ..label_of(agg, obs)
        });
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    Curve::new(label.unwrap_or_default(), pts)
}

/// `S_region` against `|A|` at the sample time nearest `t` (constant schedules).
pub fn region_slice(agg: &EnsembleAggregate, t: f64) -> Result<Curve, AnalysisError> {
    let t_near = agg
        .points
        .iter()
        .map(|pt| pt.t)
        .min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()))
        .ok_or_else(|| AnalysisError::Curve("empty aggregate".into()))?;
    let mut pts: Vec<CurvePoint> = agg
        .points
        .iter()
        .filter(|pt| pt.t == t_near)
        .filter_map(|pt| match pt.observable {
            Observable::SRegion(a) => Some(CurvePoint {
                x: a as f64,
                y: pt.mean,
                y_err: pt.sem,
            }),
            _ => None,
        })
        .collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    let label = CurveLabel {
        region_size: None,
        ..label_of(agg, Observable::SHalf)
    };
    Curve::new(label, pts)
}

/// Steady-state values against `g` from one constant-schedule aggregate per `p`,
/// taking the sample nearest time `t` from each.
pub fn steady_curve(aggs: &[EnsembleAggregate], obs: Observable, t: f64) -> Result<Curve, AnalysisError> {
    let mut pts = Vec::new();
    for agg in aggs {
        let pt = agg
            .series(obs)
            .into_iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .ok_or_else(|| AnalysisError::Curve(format!("aggregate has no {} samples", obs.name())))?;
        pts.push(CurvePoint {
            x: pt.g,
            y: pt.mean,
            y_err: pt.sem,
        });
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    let label = aggs.first().map(|a| CurveLabel {
        rate: None,
        p0: None,
        ..label_of(a, obs)
    });
    Curve::new(label.unwrap_or_default(), pts)
}

#[derive(Serialize, Deserialize)]
struct CurveRow {
    curve: usize,
    rate: Option<f64>,
    region_size: Option<usize>,
    l: Option<usize>,
    p0: Option<f64>,
    direction: Option<Direction>,
    x: f64,
    y: f64,
    y_err: f64,
}

/// Writes curves as long-format CSV, one row per point.
pub fn write_curves(curves: &[Curve], path: &Path) -> Result<(), AnalysisError> {
    let io = |e: csv::Error| AnalysisError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for (i, c) in curves.iter().enumerate() {
        for p in &c.points {
            w.serialize(CurveRow {
                curve: i,
                rate: c.label.rate,
                region_size: c.label.region_size,
                l: c.label.l,
                p0: c.label.p0,
                direction: c.label.direction,
                x: p.x,
                y: p.y,
                y_err: p.y_err,
            })
            .map_err(io)?;
        }
    }
    w.flush()
        .map_err(|e| AnalysisError::Io(format!("{}: {e}", path.display())))
}

pub fn read_curves(path: &Path) -> Result<Vec<Curve>, AnalysisError> {
    let io = |e: csv::Error| AnalysisError::Io(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    let mut curves: Vec<Curve> = Vec::new();
    for row in r.deserialize() {
        let row: CurveRow = row.map_err(io)?;
        if row.curve == curves.len() {
            curves.push(Curve {
                label: CurveLabel {
                    rate: row.rate,
                    region_size: row.region_size,
                    l: row.l,
                    p0: row.p0,
                    direction: row.direction,
                },
                points: Vec::new(),
            });
        }
        let in_order = row.curve + 1 == curves.len();
        let c = curves
            .last_mut()
            .filter(|_| in_order)
            .ok_or_else(|| AnalysisError::Io(format!("{}: curve {} out of order", path.display(), row.curve)))?;
        c.points.push(CurvePoint {
            x: row.x,
            y: row.y,
            y_err: row.y_err,
        });
    }
    curves.into_iter().map(|c| Curve::new(c.label, c.points)).collect()
}
