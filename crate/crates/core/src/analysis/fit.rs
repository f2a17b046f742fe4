use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::collapse::CollapseResult;
use super::curves::{Curve, CurvePoint};
use super::{AnalysisError, ScalingConstants};

/// Relative residual above which a fit is flagged as a poor description.
pub const RESIDUAL_FLAG: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    /// One-sigma error of `y`; unweighted when absent.
    pub err: Option<f64>,
}

impl DataPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, err: None }
    }
}

impl From<&CurvePoint> for DataPoint {
    fn from(p: &CurvePoint) -> Self {
        Self {
            x: p.x,
            y: p.y,
            err: (p.y_err > 0.0).then_some(p.y_err),
        }
    }
}

impl From<&Curve> for Vec<DataPoint> {
    fn from(c: &Curve) -> Self {
        c.points.iter().map(DataPoint::from).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    /// `sqrt(1 − R²)` of the unweighted residuals.
    pub relative_residual: f64,
    /// Set when `relative_residual` exceeds [`RESIDUAL_FLAG`].
    pub flagged: bool,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Value of a parameter this fit is known to produce.
    pub fn value(&self, name: &str) -> f64 {
        self.param(name)
            .unwrap_or_else(|| panic!("fit has no parameter {name}"))
            .value
    }

    pub fn sigma(&self, name: &str) -> f64 {
        self.param(name)
            .unwrap_or_else(|| panic!("fit has no parameter {name}"))
            .sigma
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoteForm {
    /// `δ ln x + c`
    Log,
    /// `c₁ x^κ`
    Power,
}

fn select(points: &[DataPoint], window: (f64, f64)) -> Vec<DataPoint> {
    points
        .iter()
        .copied()
        .filter(|p| p.x >= window.0 && p.x <= window.1)
        .collect()
}

fn top_decade(points: &[DataPoint]) -> Result<(f64, f64), AnalysisError> {
    let hi = points
        .iter()
        .map(|p| p.x)
        .reduce(f64::max)
        .ok_or_else(|| AnalysisError::Degenerate("no points".into()))?;
    Ok((hi / 10.0, hi))
}

fn check_points(points: &[DataPoint]) -> Result<(), AnalysisError> {
    if let Some(p) = points.iter().find(|p| {
        !(p.x > 0.0 && p.x.is_finite() && p.y.is_finite()) || p.err.is_some_and(|e| !(e > 0.0 && e.is_finite()))
    }) {
        return Err(AnalysisError::Degenerate(format!(
            "unusable point {p:?} (x must be positive)"
        )));
    }
    Ok(())
}

fn weights(points: &[DataPoint]) -> (DVector<f64>, bool) {
    let weighted = points.iter().all(|p| p.err.is_some());
    let w = points
        .iter()
        .map(|p| {
            if weighted {
                p.err.map_or(1.0, |e| 1.0 / (e * e))
            } else {
                1.0
            }
        })
        .collect::<Vec<_>>();
    (DVector::from_vec(w), weighted)
}

fn relative_residual(y: &[f64], fitted: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(fitted).map(|(a, b)| (a - b).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (ss_res / ss_tot).sqrt()
    }
}

/// Weighted least squares of `y` on the columns of `design`.
fn linear_fit(
    design: DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    weighted: bool,
) -> Result<(DVector<f64>, DMatrix<f64>, f64), AnalysisError> {
    let (n, k) = design.shape();
    let sw = w.map(f64::sqrt);
    let a = DMatrix::from_fn(n, k, |i, j| design[(i, j)] * sw[i]);
    let b = y.component_mul(&sw);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= smax * 1e-12 {
        return Err(AnalysisError::Degenerate("design matrix is rank deficient".into()));
    }
    let beta = svd
        .solve(&b, 0.0)
        .map_err(|e| AnalysisError::Degenerate(e.to_string()))?;
    let resid = &b - &a * &beta;
    let rss = resid.norm_squared();
    let normal = a.transpose() * &a;
    let mut cov = normal
        .try_inverse()
        .ok_or_else(|| AnalysisError::Degenerate("singular normal matrix".into()))?;
    if !weighted {
        let s2 = if n > k { rss / (n - k) as f64 } else { 0.0 };
        cov *= s2;
    }
    Ok((beta, cov, rss))
}

fn log_linear(points: &[DataPoint], window: (f64, f64), names: [&str; 2]) -> Result<FitResult, AnalysisError> {
    let pts = select(points, window);
    check_points(&pts)?;
    let distinct = {
        let mut xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.len()
    };
    if pts.len() < 3 || distinct < 2 {
        return Err(AnalysisError::Degenerate(format!(
            "{} points in window [{}, {}], need at least 3",
            pts.len(),
            window.0,
            window.1
        )));
    }
    let n = pts.len();
    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { pts[i].x.ln() } else { 1.0 });
    let y = DVector::from_iterator(n, pts.iter().map(|p| p.y));
    let (w, weighted) = weights(&pts);
    let (beta, cov, rss) = linear_fit(design, &y, &w, weighted)?;
    let fitted: Vec<f64> = pts.iter().map(|p| beta[0] * p.x.ln() + beta[1]).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    let rel = relative_residual(&ys, &fitted);
    Ok(FitResult {
        parameters: vec![
            FitParameter {
                name: names[0].into(),
                value: beta[0],
                sigma: cov[(0, 0)].max(0.0).sqrt(),
            },
            FitParameter {
                name: names[1].into(),
                value: beta[1],
                sigma: cov[(1, 1)].max(0.0).sqrt(),
            },
        ],
        rss,
        window,
        n_points: n,
        relative_residual: rel,
        flagged: rel > RESIDUAL_FLAG,
    })
}

/// Fits `S = δ ln R + c`; the window defaults to the top decade of `R`.
pub fn fit_log(points: &[DataPoint], window: Option<(f64, f64)>) -> Result<FitResult, AnalysisError> {
    let window = match window {
        Some(w) => w,
        None => top_decade(points)?,
    };
    log_linear(points, window, ["delta", "c"])
}

/// Fits `S = α ln|A| + c` to steady-state data.
pub fn fit_steady_alpha(points: &[DataPoint]) -> Result<FitResult, AnalysisError> {
    let lo = points.iter().map(|p| p.x).reduce(f64::min).unwrap_or(0.0);
    let hi = points.iter().map(|p| p.x).reduce(f64::max).unwrap_or(0.0);
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(AnalysisError::Degenerate("need at least 3 distinct |A|".into()));
    }
    log_linear(points, (lo, hi), ["alpha", "c"])
}

const POWER_NAMES: [&str; 4] = ["a", "kappa", "b", "c"];
const MAX_ITER: usize = 500;

struct PowerData {
    lx: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl PowerData {
    fn model(&self, th: &[f64; 4], i: usize) -> f64 {
        th[0] * (th[1] * self.lx[i]).exp() + th[2] * self.lx[i] + th[3]
    }

    fn rss(&self, th: &[f64; 4]) -> f64 {
        (0..self.y.len())
            .map(|i| self.w[i] * (self.y[i] - self.model(th, i)).powi(2))
            .sum()
    }

    fn jacobian(&self, th: &[f64; 4]) -> DMatrix<f64> {
        DMatrix::from_fn(self.y.len(), 4, |i, j| {
            let xk = (th[1] * self.lx[i]).exp();
            match j {
                0 => xk,
                1 => th[0] * xk * self.lx[i],
                2 => self.lx[i],
                _ => 1.0,
            }
        })
    }

    fn normal(&self, th: &[f64; 4]) -> (DMatrix<f64>, DVector<f64>) {
        let j = self.jacobian(th);
        let n = self.y.len();
        let wj = DMatrix::from_fn(n, 4, |i, k| j[(i, k)] * self.w[i]);
        let r = DVector::from_iterator(n, (0..n).map(|i| self.y[i] - self.model(th, i)));
        (j.transpose() * &wj, wj.transpose() * r)
    }

    /// Linear solve for `a` and `c` with `κ` and `b` held fixed.
    fn seed(&self, kappa: f64, b: f64) -> Option<[f64; 4]> {
        let n = self.y.len();
        let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { (kappa * self.lx[i]).exp() } else { 1.0 });
        let y = DVector::from_iterator(n, (0..n).map(|i| self.y[i] - b * self.lx[i]));
        let w = DVector::from_vec(self.w.clone());
        let (beta, _, _) = linear_fit(design, &y, &w, true).ok()?;
        Some([beta[0], kappa, b, beta[1]])
    }

    /// Levenberg–Marquardt from `th`; returns the optimum if converged.
    fn levenberg_marquardt(&self, mut th: [f64; 4]) -> Option<([f64; 4], f64)> {
        let mut lambda = 1e-3;
        let mut rss = self.rss(&th);
        let scale = self.y.iter().map(|v| v * v).sum::<f64>().max(1e-300);
        for _ in 0..MAX_ITER {
            let (jtj, g) = self.normal(&th);
            if g.amax() <= 1e-14 * scale.sqrt() {
                return Some((th, rss));
            }
            let mut improved = false;
            while lambda < 1e16 {
                let mut m = jtj.clone();
                for k in 0..4 {
                    m[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
                }
                let Some(step) = m.cholesky().map(|c| c.solve(&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let cand = [th[0] + step[0], th[1] + step[1], th[2] + step[2], th[3] + step[3]];
                let r = self.rss(&cand);
                if r.is_finite() && r <= rss {
                    let done = rss - r <= 1e-15 * rss.max(1e-300 * scale)
                        || step.amax() <= 1e-13 * (1.0 + th.iter().fold(0.0f64, |a, v| a.max(v.abs())));
                    th = cand;
                    rss = r;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = true;
                    if done || rss <= 1e-28 * scale {
                        return Some((th, rss));
                    }
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                // No downhill step at any damping: a stationary point.
                return Some((th, rss));
            }
        }
        None
    }
}

/// Fits `S = a R^κ + b ln R + c` by Levenberg–Marquardt from several starts.
///
/// The window defaults to all points. The fit fails rather than returning an
/// arbitrary exponent when `κ` is not identifiable from the data.
pub fn fit_power_log(points: &[DataPoint], window: Option<(f64, f64)>) -> Result<FitResult, AnalysisError> {
    let window = window.unwrap_or_else(|| {
        let lo = points.iter().map(|p| p.x).reduce(f64::min).unwrap_or(0.0);
        let hi = points.iter().map(|p| p.x).reduce(f64::max).unwrap_or(0.0);
        (lo, hi)
    });
    let pts = select(points, window);
    check_points(&pts)?;
    if pts.len() < 5 {
        return Err(AnalysisError::Degenerate(format!(
            "{} points in window, need at least 5",
            pts.len()
        )));
    }
    let (w, weighted) = weights(&pts);
    let data = PowerData {
        lx: pts.iter().map(|p| p.x.ln()).collect(),
        y: pts.iter().map(|p| p.y).collect(),
        w: w.iter().copied().collect(),
    };
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    let log_only = DMatrix::from_fn(pts.len(), 2, |i, j| if j == 0 { data.lx[i] } else { 1.0 });
    let (_, _, log_rss) = linear_fit(log_only, &DVector::from_vec(ys.clone()), &w, true)?;
    let spread = relative_residual(&ys, &vec![ys.iter().sum::<f64>() / ys.len() as f64; ys.len()]);
    if spread == 0.0 || log_rss <= 1e-24 * data.rss(&[0.0, 0.0, 0.0, 0.0]) {
        return Err(AnalysisError::Degenerate(
            "exponent not identifiable: data carry no power-law component".into(),
        ));
    }
    let b0 = ScalingConstants::default().alpha / ScalingConstants::default().r();
    let mut best: Option<([f64; 4], f64)> = None;
    let mut failures = Vec::new();
    for kappa in [0.3, 0.5, 0.557, 0.7] {
        for b in [0.0, b0, -b0] {
            let Some(start) = data.seed(kappa, b) else {
                failures.push(format!("start κ={kappa}, b={b}: singular seed"));
                continue;
            };
            match data.levenberg_marquardt(start) {
                Some((th, r)) if best.is_none_or(|(_, br)| r < br) => best = Some((th, r)),
                Some(_) => {}
                None => failures.push(format!(
                    "start κ={kappa}, b={b}: no convergence in {MAX_ITER} iterations"
                )),
            }
        }
    }
    let (th, rss) = best.ok_or_else(|| AnalysisError::NoConvergence(failures.join("; ")))?;
    let (jtj, _) = data.normal(&th);
    let diag: Vec<f64> = (0..4).map(|k| jtj[(k, k)]).collect();
    if diag.iter().any(|d| d.is_nan() || *d <= 0.0) {
        return Err(AnalysisError::Degenerate(
            "exponent not identifiable (flat response to a parameter)".into(),
        ));
    }
    let corr = DMatrix::from_fn(4, 4, |i, j| jtj[(i, j)] / (diag[i] * diag[j]).sqrt());
    let eig = corr.symmetric_eigenvalues();
    if eig.min() <= 1e-13 * eig.max() {
        return Err(AnalysisError::Degenerate(format!(
            "exponent not identifiable (normal matrix condition {:.3e})",
            eig.max() / eig.min().max(0.0)
        )));
    }
    let mut cov = jtj
        .try_inverse()
        .ok_or_else(|| AnalysisError::Degenerate("singular normal matrix at optimum".into()))?;
    let n = pts.len();
    if !weighted {
        cov *= if n > 4 { rss / (n - 4) as f64 } else { 0.0 };
    }
    let fitted: Vec<f64> = (0..n).map(|i| data.model(&th, i)).collect();
    let rel = relative_residual(&data.y, &fitted);
    Ok(FitResult {
        parameters: (0..4)
            .map(|k| FitParameter {
                name: POWER_NAMES[k].into(),
                value: th[k],
                sigma: cov[(k, k)].max(0.0).sqrt(),
            })
            .collect(),
        rss,
        window,
        n_points: n,
        relative_residual: rel,
        flagged: rel > RESIDUAL_FLAG,
    })
}

/// Fits the large-argument tail (top decade of x) of a collapsed master curve.
///
/// The log form reports `delta` and `c`; the power form reports `c1` and
/// `exponent` from a log-log fit.
pub fn asymptote_check(master: &CollapseResult, form: AsymptoteForm) -> Result<FitResult, AnalysisError> {
    let pooled: Vec<DataPoint> = master
        .curves
        .iter()
        .flat_map(|c| c.points.iter().map(DataPoint::from))
        .filter(|p| p.x > 0.0)
        .collect();
    let window = top_decade(&pooled)?;
    let tail = select(&pooled, window);
    if tail.len() < 3 {
        return Err(AnalysisError::Degenerate(format!(
            "only {} tail points in [{}, {}]",
            tail.len(),
            window.0,
            window.1
        )));
    }
    match form {
        AsymptoteForm::Log => fit_log(&tail, Some(window)),
        AsymptoteForm::Power => {
            if tail.iter().any(|p| p.y <= 0.0) {
                return Err(AnalysisError::Degenerate("power tail needs positive values".into()));
            }
            let logged: Vec<DataPoint> = tail
                .iter()
                .map(|p| DataPoint {
                    x: p.x,
                    y: p.y.ln(),
                    err: p.err.map(|e| e / p.y),
                })
                .collect();
            let mut f = log_linear(&logged, window, ["exponent", "ln_c1"])?;
            let lnc = f.parameters[1].clone();
            f.parameters[1] = FitParameter {
                name: "c1".into(),
                value: lnc.value.exp(),
                sigma: lnc.value.exp() * lnc.sigma,
            };
            Ok(f)
        }
    }
}
