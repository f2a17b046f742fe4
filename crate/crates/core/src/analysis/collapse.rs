use serde::{Deserialize, Serialize};

use super::curves::{Curve, CurvePoint};
use super::{AnalysisError, ScalingConstants};

/// Which scaling form to rescale by. Input curves carry `x = g` and `y = S`
/// (or `x = R` for [`RescaleMode::PcVelocity`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RescaleMode {
    /// `S − α ln|A|` against `g|A|^{1/ν}` at fixed `R|A|^r`.
    Bulk,
    /// `S − δ ln R` against `g R^{−1/(νr)}`.
    Velocity,
    /// `S − α ln(L/2)` against `g L^{1/ν}` at fixed `R L^r`.
    Size,
    /// Raw `y` against `g L^{1/ν}` at fixed `R L^r`.
    Dimensionless,
    /// `S − α ln|A|` against `g|A|^{1/ν}` for steady states.
    Steady,
    /// `S(p_c) − α ln|A|` against `R|A|^r`.
    PcVelocity,
}

impl RescaleMode {
    pub const ALL: [RescaleMode; 6] = [
        RescaleMode::Bulk,
        RescaleMode::Velocity,
        RescaleMode::Size,
        RescaleMode::Dimensionless,
        RescaleMode::Steady,
        RescaleMode::PcVelocity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RescaleMode::Bulk => "BULK",
            RescaleMode::Velocity => "VELOCITY",
            RescaleMode::Size => "SIZE",
            RescaleMode::Dimensionless => "DIMENSIONLESS",
            RescaleMode::Steady => "STEADY",
            RescaleMode::PcVelocity => "PC_VELOCITY",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub mode: RescaleMode,
    pub curves: Vec<Curve>,
    pub quality: f64,
    /// Quality of the input curves before rescaling, when they overlap.
    pub quality_before: Option<f64>,
}

fn need<T: Copy>(v: Option<T>, index: usize, label: &'static str) -> Result<T, AnalysisError> {
    v.ok_or(AnalysisError::MissingLabel { index, label })
}

/// Per-curve `(x scale, y shift)` of the mode.
fn transform(curves: &[Curve], c: &ScalingConstants, mode: RescaleMode) -> Result<Vec<(f64, f64)>, AnalysisError> {
    c.validate()?;
    let (r, nu) = (c.r(), c.nu);
    let mut products = Vec::new();
    let mut out = Vec::with_capacity(curves.len());
    for (i, cv) in curves.iter().enumerate() {
        let lab = &cv.label;
        let t = match mode {
            RescaleMode::Bulk => {
                let (rate, a) = (
                    need(lab.rate, i, "rate")?,
                    need(lab.region_size, i, "region_size")? as f64,
                );
                products.push(rate * a.powf(r));
                (a.powf(1.0 / nu), -c.alpha * a.ln())
            }
            RescaleMode::Velocity => {
                let rate = need(lab.rate, i, "rate")?;
                (rate.powf(-1.0 / (nu * r)), -c.delta() * rate.ln())
            }
            RescaleMode::Size | RescaleMode::Dimensionless => {
                let (rate, l) = (need(lab.rate, i, "rate")?, need(lab.l, i, "l")? as f64);
                products.push(rate * l.powf(r));
                let shift = if mode == RescaleMode::Size {
                    -c.alpha * (l / 2.0).ln()
                } else {
                    0.0
                };
                (l.powf(1.0 / nu), shift)
            }
            RescaleMode::Steady => {
                let a = need(lab.region_size, i, "region_size")? as f64;
                (a.powf(1.0 / nu), -c.alpha * a.ln())
            }
            RescaleMode::PcVelocity => {
                let a = need(lab.region_size, i, "region_size")? as f64;
                (a.powf(r), -c.alpha * a.ln())
            }
        };
        out.push(t);
    }
    if let (Some(lo), Some(hi)) = (
        products.iter().copied().reduce(f64::min),
        products.iter().copied().reduce(f64::max),
    ) {
        if hi > lo * 1.01 {
            let what = if mode == RescaleMode::Bulk { "R|A|^r" } else { "RL^r" };
            return Err(AnalysisError::ProductMismatch { what, values: products });
        }
    }
    Ok(out)
}

fn apply(curves: &[Curve], t: &[(f64, f64)], inverse: bool) -> Vec<Curve> {
    curves
        .iter()
        .zip(t)
        .map(|(cv, &(scale, shift))| Curve {
            label: cv.label.clone(),
            points: cv
                .points
                .iter()
                .map(|p| {
                    let (x, y) = if inverse {
                        (p.x / scale, p.y - shift)
                    } else {
                        (p.x * scale, p.y + shift)
                    };
                    CurvePoint { x, y, y_err: p.y_err }
                })
                .collect(),
        })
        .collect()
}

/// Rescales `curves` by the scaling form of `mode` and scores the collapse.
pub fn rescale_fts(
    curves: &[Curve],
    constants: &ScalingConstants,
    mode: RescaleMode,
) -> Result<CollapseResult, AnalysisError> {
    let t = transform(curves, constants, mode)?;
    let rescaled = apply(curves, &t, false);
    Ok(CollapseResult {
        mode,
        quality: collapse_quality(&rescaled)?,
        quality_before: collapse_quality(curves).ok(),
        curves: rescaled,
    })
}

/// Undoes [`rescale_fts`] given the original labels.
pub fn inverse_rescale(
    rescaled: &[Curve],
    constants: &ScalingConstants,
    mode: RescaleMode,
) -> Result<Vec<Curve>, AnalysisError> {
    let t = transform(rescaled, constants, mode)?;
    Ok(apply(rescaled, &t, true))
}

/// Mean squared deviation from the master curve over the pooled variance.
///
/// The master curve is the average of the curves' linear interpolants on the
/// shared x support; only points inside that support are scored.
pub fn collapse_quality(curves: &[Curve]) -> Result<f64, AnalysisError> {
    if curves.len() < 2 {
        return Err(AnalysisError::Curve("collapse needs at least two curves".into()));
    }
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for c in curves {
        let (a, b) = c.x_range().ok_or(AnalysisError::NoOverlap)?;
        lo = lo.max(a);
        hi = hi.min(b);
    }
    if lo >= hi {
        return Err(AnalysisError::NoOverlap);
    }
    let master = |x: f64| {
        curves
            .iter()
            .map(|c| c.interpolate(x).expect("x inside shared support"))
            .sum::<f64>()
            / curves.len() as f64
    };
    let pts: Vec<(f64, f64)> = curves
        .iter()
        .flat_map(|c| c.points.iter())
        .filter(|p| p.x >= lo && p.x <= hi)
        .map(|p| (p.y, master(p.x)))
        .collect();
    let n = pts.len() as f64;
    let msd = pts.iter().map(|(y, m)| (y - m).powi(2)).sum::<f64>() / n;
    let mean = pts.iter().map(|(y, _)| y).sum::<f64>() / n;
    let var = pts.iter().map(|(y, _)| (y - mean).powi(2)).sum::<f64>() / n;
    if msd == 0.0 {
        return Ok(0.0);
    }
    if var == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(msd / var)
}

#[cfg(test)]
mod tests {
    use super::super::curves::CurveLabel;
    use super::*;
    use proptest::prelude::*;

    fn labelled(rate: f64, a: usize, l: usize) -> CurveLabel {
        CurveLabel {
            rate: Some(rate),
            region_size: Some(a),
            l: Some(l),
            ..Default::default()
        }
    }

    fn wavy(label: CurveLabel, shift: f64) -> Curve {
        Curve::from_xy(
            label,
            (0..40).map(|k| {
                let x = k as f64 * 0.1;
                (x, (3.0 * x).sin() + 0.5 * x + shift)
            }),
        )
        .unwrap()
    }

    #[test]
    fn identical_curves_collapse_perfectly() {
        let c = wavy(labelled(0.01, 64, 128), 0.0);
        assert_eq!(collapse_quality(&[c.clone(), c.clone()]).unwrap(), 0.0);
        for mode in RescaleMode::ALL {
            let r = rescale_fts(&[c.clone(), c.clone()], &ScalingConstants::default(), mode).unwrap();
            assert_eq!(r.quality, 0.0, "{mode:?}");
        }
    }

    #[test]
    fn shifted_copies_score_near_one() {
        let a = wavy(CurveLabel::default(), 0.0);
        let ys: Vec<f64> = a.points.iter().map(|p| p.y).collect();
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        let sd = (ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / ys.len() as f64).sqrt();
        let b = wavy(CurveLabel::default(), 10.0 * sd);
        assert!(collapse_quality(&[a, b]).unwrap() >= 0.9);
    }

    #[test]
    fn quality_errors() {
        let a = Curve::from_xy(CurveLabel::default(), [(0.0, 1.0), (1.0, 2.0)]).unwrap();
        let b = Curve::from_xy(CurveLabel::default(), [(2.0, 1.0), (3.0, 2.0)]).unwrap();
        assert_eq!(collapse_quality(&[a.clone(), b]), Err(AnalysisError::NoOverlap));
        assert!(collapse_quality(&[a]).is_err());
    }

    #[test]
    fn labels_and_products_checked() {
        let c = ScalingConstants::default();
        let plain = wavy(CurveLabel::default(), 0.0);
        assert!(matches!(
            rescale_fts(&[plain.clone(), plain], &c, RescaleMode::Velocity),
            Err(AnalysisError::MissingLabel { label: "rate", .. })
        ));
        let r = c.r();
        let ok = |a: usize| wavy(labelled(9.292 / (a as f64).powf(r), a, 2 * a), 0.0);
        assert!(rescale_fts(&[ok(64), ok(128), ok(256)], &c, RescaleMode::Bulk).is_ok());
        let off = wavy(labelled(1.03 * 9.292 / 128f64.powf(r), 128, 256), 0.0);
        assert!(matches!(
            rescale_fts(&[ok(64), off], &c, RescaleMode::Bulk),
            Err(AnalysisError::ProductMismatch { .. })
        ));
    }

    #[test]
    fn scaling_form_data_collapses() {
        // Synthetic data obeying S = δ ln R + G(g R^{-1/(νr)}).
        let c = ScalingConstants::default();
        let master = |u: f64| 2.0 + u.tanh();
        let curves: Vec<Curve> = [0.01, 0.04, 0.16]
            .iter()
            .map(|&rate: &f64| {
                let s = rate.powf(-1.0 / (c.nu * c.r()));
                Curve::from_xy(
                    labelled(rate, 64, 128),
                    (-30..=30).map(|k| {
                        let g = k as f64 * 0.005;
                        (g, c.delta() * rate.ln() + master(g * s))
                    }),
                )
                .unwrap()
            })
            .collect();
        let res = rescale_fts(&curves, &c, RescaleMode::Velocity).unwrap();
        assert!(res.quality < 1e-3, "{}", res.quality);
        assert!(res.quality_before.unwrap() > 0.5);
    }

    proptest! {
        #[test]
        fn affine_invariance(a in 0.1f64..10.0, b in -5.0f64..5.0, s in 0.0f64..3.0) {
            let c1 = wavy(CurveLabel::default(), 0.0);
            let c2 = wavy(CurveLabel::default(), s);
            let q = collapse_quality(&[c1.clone(), c2.clone()]).unwrap();
            let map = |c: &Curve| Curve::from_xy(CurveLabel::default(), c.points.iter().map(|p| (p.x, a * p.y + b))).unwrap();
            let q2 = collapse_quality(&[map(&c1), map(&c2)]).unwrap();
            prop_assert!((q - q2).abs() <= 1e-9 * (1.0 + q));
        }

        #[test]
        fn inverse_recovers_input(rate in 1e-3f64..0.5, a in 2usize..300, mode_ix in 0usize..6) {
            let mode = RescaleMode::ALL[mode_ix];
            let c = wavy(labelled(rate, a, 2 * a), 0.3);
            let res = rescale_fts(&[c.clone(), c.clone()], &ScalingConstants::default(), mode).unwrap();
            let back = inverse_rescale(&res.curves, &ScalingConstants::default(), mode).unwrap();
            for (p, q) in back[0].points.iter().zip(&c.points) {
                prop_assert!((p.x - q.x).abs() <= 1e-12 * (1.0 + q.x.abs()));
                prop_assert!((p.y - q.y).abs() <= 1e-12 * (1.0 + q.y.abs()));
            }
        }
    }
}
