use super::{ArimaError, ArimaOrder};

#[derive(Debug, Clone, PartialEq)]
pub struct CssResult {
    /// One residual per observation; zero before the conditioning point.
    pub residuals: Vec<f64>,
    pub sse: f64,
    pub n_eff: usize,
}

/// Conditional residuals of an ARMA(p, q) with intercept on an already
/// differenced series, conditioning on the first `p` observations.
pub fn css_residuals(z: &[f64], order: ArimaOrder, phi: &[f64], theta: &[f64], c: f64) -> Result<CssResult, ArimaError> {
    css_residuals_from(z, order.p, phi, theta, c)
}

/// As [`css_residuals`] but conditioning on the first `start >= p`
/// observations, so candidates of different AR order can share one sample.
pub fn css_residuals_from(z: &[f64], start: usize, phi: &[f64], theta: &[f64], c: f64) -> Result<CssResult, ArimaError> {
    let p = phi.len();
    let start = start.max(p);
    if z.len() <= start {
        return Err(ArimaError::TooShort {
            need: start + 1,
            got: z.len(),
        });
    }
    let mut residuals = vec![0.0; z.len()];
    let mut sse = 0.0;
    for t in start..z.len() {
        let mut e = z[t] - c;
        for (i, ph) in phi.iter().enumerate() {
            e -= ph * z[t - 1 - i];
        }
        for (j, th) in theta.iter().enumerate() {
            if let Some(k) = t.checked_sub(j + 1) {
                e -= th * residuals[k];
            }
        }
        residuals[t] = e;
        sse += e * e;
    }
    Ok(CssResult {
        residuals,
        sse,
        n_eff: z.len() - start,
    })
}
