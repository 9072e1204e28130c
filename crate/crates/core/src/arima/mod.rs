//! ARIMA(p, d, q) estimation and forecasting.
//!
//! The model on the `d`-times differenced series `z` is
//!
//! ```text
//! z_t = c + sum_i phi_i z_{t-i} + sum_j theta_j e_{t-j} + e_t
//! ```
//!
//! Coefficients minimize the conditional sum of squares (residuals before
//! the conditioning point are zero) with Nelder-Mead. Stationarity and
//! invertibility are checked after fitting and reported, not enforced.

mod css;
mod diff;
mod estimate;
mod exog;
mod forecast;
mod roots;
mod select;

use serde::{Deserialize, Serialize};

pub use css::{css_residuals, css_residuals_from, CssResult};
pub use diff::{difference, integrate_continuation, reconstruct, undifference};
pub use estimate::{fit, fit_conditioned, yule_walker, FitOptions};
pub use exog::{fit_with_exog, ols, ArimaxModel, OlsFit};
pub use forecast::forecast;
pub use roots::{ar_root_moduli, ma_root_moduli, poly_roots};
pub use select::{lag1_autocorrelation, select_order, GridEntry, GridReport, SelectConfig};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ArimaError {
    #[error("series too short: need at least {need} observations, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("expected {expected} anchors, got {got}")]
    AnchorMismatch { expected: usize, got: usize },
    #[error("objective is not finite; the fit diverged")]
    Diverged,
    #[error("model did not converge")]
    NotConverged,
    #[error("residual variance is zero; AIC undefined")]
    ZeroVariance,
    #[error("order exceeds caps or is invalid: {0}")]
    InvalidOrder(String),
    #[error("singular design matrix (collinear exogenous columns)")]
    SingularDesign,
    #[error("exogenous columns misaligned: {0}")]
    ExogMismatch(String),
    #[error("no grid candidate produced a converged fit")]
    NoValidCandidate,
    #[error("non-finite input")]
    NonFiniteInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub const fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    /// Default grid caps for order selection.
    pub const fn default_caps() -> Self {
        Self::new(3, 2, 3)
    }

    /// Estimated coefficients including the intercept.
    pub fn n_params(&self) -> usize {
        self.p + self.q + 1
    }

    /// Minimum series length accepted by [`fit`].
    pub fn min_length(&self) -> usize {
        self.p + self.q + self.d + 10
    }

    pub fn within(&self, caps: &ArimaOrder) -> bool {
        self.p <= caps.p && self.d <= caps.d && self.q <= caps.q
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFitReport {
    /// `None` when the fit did not converge or the residual variance is zero.
    pub aic: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Moduli of the AR polynomial roots (stationary when all exceed 1).
    pub ar_root_moduli: Vec<f64>,
    /// Moduli of the MA polynomial roots (invertible when all exceed 1).
    pub ma_root_moduli: Vec<f64>,
    pub stationary: bool,
    pub invertible: bool,
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub c: f64,
    pub sigma2: f64,
    pub sse: f64,
    pub n_eff: usize,
    /// Leading values of each difference level, `[x_0, (dx)_0, ...]`.
    pub anchors: Vec<f64>,
    /// The last `d + p` observations of the original series.
    pub last_values: Vec<f64>,
    /// The last `q` in-sample residuals.
    pub residual_tail: Vec<f64>,
    pub fit_report: ArimaFitReport,
}

/// Gaussian-CSS information criterion `n_eff ln(sse / n_eff) + 2(p + q + 1)`.
pub fn aic(model: &ArimaModel) -> Result<f64, ArimaError> {
    if !model.fit_report.converged {
        return Err(ArimaError::NotConverged);
    }
    aic_value(model.sse, model.n_eff, model.order)
}

pub(crate) fn aic_value(sse: f64, n_eff: usize, order: ArimaOrder) -> Result<f64, ArimaError> {
    if !(sse > 0.0) || n_eff == 0 {
        return Err(ArimaError::ZeroVariance);
    }
    let n = n_eff as f64;
    Ok(n * (sse / n).ln() + 2.0 * order.n_params() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_with(sse: f64, n_eff: usize, p: usize, q: usize) -> ArimaModel {
        ArimaModel {
            order: ArimaOrder::new(p, 0, q),
            phi: vec![0.0; p],
            theta: vec![0.0; q],
            c: 0.0,
            sigma2: sse / n_eff as f64,
            sse,
            n_eff,
            anchors: vec![],
            last_values: vec![],
            residual_tail: vec![],
            fit_report: ArimaFitReport {
                aic: None,
                converged: true,
                iterations: 0,
                ar_root_moduli: vec![],
                ma_root_moduli: vec![],
                stationary: true,
                invertible: true,
                zero_variance: false,
            },
        }
    }

    #[test]
    fn aic_hand_value() {
        let a = aic(&model_with(6.25, 2, 1, 0)).unwrap();
        assert!((a - (2.0 * 3.125f64.ln() + 4.0)).abs() < 1e-12);
        assert!((a - 6.2788).abs() < 1e-4);
    }

    #[test]
    fn aic_penalty_and_halving() {
        let small = aic(&model_with(10.0, 50, 1, 0)).unwrap();
        let big = aic(&model_with(10.0, 50, 2, 1)).unwrap();
        assert!(big > small);
        let halved = aic(&model_with(5.0, 50, 1, 0)).unwrap();
        assert!((small - halved - 50.0 * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn aic_requires_convergence_and_variance() {
        let mut m = model_with(1.0, 10, 1, 0);
        m.fit_report.converged = false;
        assert_eq!(aic(&m), Err(ArimaError::NotConverged));
        assert_eq!(aic(&model_with(0.0, 10, 1, 0)), Err(ArimaError::ZeroVariance));
    }
}
