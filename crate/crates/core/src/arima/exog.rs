use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::estimate::{fit, FitOptions};
use super::forecast::forecast;
use super::{ArimaError, ArimaModel, ArimaOrder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Least squares of `y` on the columns of `exog` plus an intercept, solved
/// by QR. A design whose R factor has a relative diagonal below 1e-10 is
/// reported as singular.
pub fn ols(y: &[f64], exog: &[Vec<f64>]) -> Result<OlsFit, ArimaError> {
    let n = y.len();
    let k = exog.len();
    for (i, col) in exog.iter().enumerate() {
        if col.len() != n {
            return Err(ArimaError::ExogMismatch(format!("column {i} has {} rows, series has {n}", col.len())));
        }
    }
    if n <= k + 1 {
        return Err(ArimaError::TooShort { need: k + 2, got: n });
    }
    let x = DMatrix::from_fn(n, k + 1, |r, c| if c == 0 { 1.0 } else { exog[c - 1][r] });
    let qr = x.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..=k).map(|i| r[(i, i)].abs()).collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    // Compare against the column norms so a rescaled column is not singular.
    let col_norms: Vec<f64> = (0..=k).map(|c| x.column(c).norm()).collect();
    if diag
        .iter()
        .zip(&col_norms)
        .any(|(d, norm)| *d <= 1e-10 * norm.max(f64::MIN_POSITIVE) || largest == 0.0)
    {
        return Err(ArimaError::SingularDesign);
    }
    let rhs = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * rhs;
    let beta = r.solve_upper_triangular(&qty).ok_or(ArimaError::SingularDesign)?;
    let fitted = &x * &beta;
    Ok(OlsFit {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        residuals: y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect(),
    })
}

/// Two-stage regression with ARIMA errors: OLS on the exogenous columns,
/// then ARIMA on the OLS residuals. With no exogenous columns the first
/// stage is skipped and the model reduces to a plain ARIMA fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaxModel {
    pub exog_names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub arima: ArimaModel,
}

pub fn fit_with_exog(
    series: &[f64],
    exog: &[Vec<f64>],
    exog_names: &[String],
    order: ArimaOrder,
    opt: &FitOptions,
) -> Result<ArimaxModel, ArimaError> {
    let (intercept, coefficients, residuals) = regression_stage(series, exog)?;
    let arima = fit(&residuals, order, opt)?;
    Ok(ArimaxModel {
        exog_names: exog_names.to_vec(),
        intercept,
        coefficients,
        arima,
    })
}

pub(crate) fn regression_stage(series: &[f64], exog: &[Vec<f64>]) -> Result<(f64, Vec<f64>, Vec<f64>), ArimaError> {
    if exog.is_empty() {
        return Ok((0.0, Vec::new(), series.to_vec()));
    }
    let o = ols(series, exog)?;
    Ok((o.intercept, o.coefficients, o.residuals))
}

impl ArimaxModel {
    /// `future_exog[i]` holds at least `horizon` future values of column `i`.
    pub fn forecast(&self, future_exog: &[Vec<f64>], horizon: usize) -> Result<Vec<f64>, ArimaError> {
        if future_exog.len() != self.coefficients.len() {
            return Err(ArimaError::ExogMismatch(format!(
                "{} future columns for {} coefficients",
                future_exog.len(),
                self.coefficients.len()
            )));
        }
        if let Some(short) = future_exog.iter().find(|c| c.len() < horizon) {
            return Err(ArimaError::ExogMismatch(format!(
                "future column has {} values, horizon is {horizon}",
                short.len()
            )));
        }
        let base = forecast(&self.arima, horizon);
        Ok((0..horizon)
            .map(|h| {
                let reg: f64 = self
                    .coefficients
                    .iter()
                    .zip(future_exog)
                    .map(|(b, col)| b * col[h])
                    .sum();
                self.intercept + reg + base[h]
            })
            .collect())
    }
}
