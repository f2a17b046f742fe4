//! Finite-time-scaling rescalings, exponent fits and collapse scoring.

mod collapse;
mod curves;
mod fit;

pub use collapse::{collapse_quality, inverse_rescale, rescale_fts, CollapseResult, RescaleMode};
pub use curves::{
    curve_from_aggregate, read_curves, region_slice, steady_curve, velocity_slice, write_curves, Curve, CurveLabel,
    CurvePoint,
};
pub use fit::{
    asymptote_check, fit_log, fit_power_log, fit_steady_alpha, AsymptoteForm, DataPoint, FitParameter, FitResult,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid scaling constants: {0}")]
    Constants(String),
    #[error("curve {index} lacks label {label}")]
    MissingLabel { index: usize, label: &'static str },
    #[error("fixed product {what} differs across curves: {values:?}")]
    ProductMismatch { what: &'static str, values: Vec<f64> },
    #[error("invalid curve: {0}")]
    Curve(String),
    #[error("curves share no x support")]
    NoOverlap,
    #[error("degenerate fit input: {0}")]
    Degenerate(String),
    #[error("fit did not converge: {0}")]
    NoConvergence(String),
    #[error("{0}")]
    Io(String),
}

/// Critical point and exponents of the transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConstants {
    pub p_c: f64,
    pub nu: f64,
    pub z: f64,
    /// Coefficient of the critical `ln|A|` law, in bits.
    pub alpha: f64,
}

impl Default for ScalingConstants {
    fn default() -> Self {
        Self {
            p_c: 0.15995,
            nu: 1.26,
            z: 1.0,
            alpha: 1.57,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    /// `r = z + 1/ν`, the scaling dimension of the drive rate.
    pub r: f64,
    /// `δ = −α/r`.
    pub delta: f64,
    pub inv_nu_r: f64,
    pub inv_r: f64,
}

impl ScalingConstants {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.nu > 0.0 && self.z > 0.0) {
            return Err(AnalysisError::Constants(format!(
                "nu and z must be positive (nu = {}, z = {})",
                self.nu, self.z
            )));
        }
        if !(0.0..=1.0).contains(&self.p_c) || !self.alpha.is_finite() {
            return Err(AnalysisError::Constants(format!(
                "p_c = {} or alpha = {} out of range",
                self.p_c, self.alpha
            )));
        }
        Ok(())
    }

    pub fn r(&self) -> f64 {
        self.z + 1.0 / self.nu
    }

    pub fn delta(&self) -> f64 {
        -self.alpha / self.r()
    }
}

pub fn derived_exponents(c: &ScalingConstants) -> Result<DerivedExponents, AnalysisError> {
    c.validate()?;
    let r = c.r();
    Ok(DerivedExponents {
        r,
        delta: c.delta(),
        inv_nu_r: 1.0 / (c.nu * r),
        inv_r: 1.0 / r,
    })
}

/// JSON report written next to rescaled curves and fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub mode: String,
    pub constants: ScalingConstants,
    pub quality: Option<QualitySummary>,
    pub parameters: Vec<FitParameter>,
    pub window: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub before: f64,
    pub after: f64,
}
