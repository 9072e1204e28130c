use super::css::css_residuals_from;
use super::diff::difference;
use super::roots::{ar_root_moduli, ma_root_moduli};
use super::{aic_value, ArimaError, ArimaFitReport, ArimaModel, ArimaOrder};
use crate::optim::{nelder_mead, NelderMeadConfig};

/// Optimizer settings for [`fit`].
pub type FitOptions = NelderMeadConfig;

/// Initial simplex offset for AR/MA coefficients and, in standardized units,
/// for the intercept.
const COEF_STEP: f64 = 0.1;

/// Conditional-sum-of-squares fit of `order` to `series`.
///
/// The differenced series is divided by its standard deviation before the
/// search so the simplex tolerance is scale-free; coefficients are mapped
/// back afterwards. The search starts from Yule-Walker AR coefficients, zero
/// MA coefficients and the differenced-series mean as intercept.
pub fn fit(series: &[f64], order: ArimaOrder, opt: &FitOptions) -> Result<ArimaModel, ArimaError> {
    fit_conditioned(series, order, opt, order.p)
}

/// As [`fit`], conditioning on the first `start >= p` differenced values.
pub fn fit_conditioned(series: &[f64], order: ArimaOrder, opt: &FitOptions, start: usize) -> Result<ArimaModel, ArimaError> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(ArimaError::NonFiniteInput);
    }
    let start = start.max(order.p);
    let need = order.min_length().max(start + order.d + 1);
    if series.len() < need {
        return Err(ArimaError::TooShort {
            need,
            got: series.len(),
        });
    }
    let ArimaOrder { p, d, q } = order;
    let (z, anchors) = difference(series, d)?;

    let (mean, sd) = mean_sd(&z);
    let scale = if sd > 0.0 {
        sd
    } else if mean != 0.0 {
        mean.abs()
    } else {
        1.0
    };
    let zs: Vec<f64> = z.iter().map(|v| v / scale).collect();

    let mut x0 = yule_walker(&zs, p);
    x0.extend(std::iter::repeat_n(0.0, q));
    x0.push(mean / scale);
    let steps = vec![COEF_STEP; x0.len()];

    let objective = |x: &[f64]| match css_residuals_from(&zs, start, &x[..p], &x[p..p + q], x[p + q]) {
        Ok(r) => r.sse,
        Err(_) => f64::INFINITY,
    };
    if !objective(&x0).is_finite() {
        return Err(ArimaError::Diverged);
    }
    let min = nelder_mead(objective, &x0, &steps, opt);
    if !min.value.is_finite() {
        return Err(ArimaError::Diverged);
    }

    let phi = min.x[..p].to_vec();
    let theta = min.x[p..p + q].to_vec();
    let c = min.x[p + q] * scale;
    let css = css_residuals_from(&z, start, &phi, &theta, c)?;
    if !css.sse.is_finite() {
        return Err(ArimaError::Diverged);
    }
    let energy: f64 = z[start..].iter().map(|v| v * v).sum();
    let zero_variance = css.sse <= 1e-20 * energy || css.sse == 0.0;

    let ar_root_moduli = ar_root_moduli(&phi);
    let ma_root_moduli = ma_root_moduli(&theta);
    let aic = if min.converged && !zero_variance {
        aic_value(css.sse, css.n_eff, order).ok()
    } else {
        None
    };
    let fit_report = ArimaFitReport {
        aic,
        converged: min.converged,
        iterations: min.iterations,
        stationary: ar_root_moduli.iter().all(|m| *m > 1.0),
        invertible: ma_root_moduli.iter().all(|m| *m > 1.0),
        ar_root_moduli,
        ma_root_moduli,
        zero_variance,
    };
    let n = series.len();
    Ok(ArimaModel {
        order,
        phi,
        theta,
        c,
        sigma2: css.sse / css.n_eff as f64,
        sse: css.sse,
        n_eff: css.n_eff,
        anchors,
        last_values: series[n - (d + p)..].to_vec(),
        residual_tail: css.residuals[css.residuals.len() - q..].to_vec(),
        fit_report,
    })
}

pub(crate) fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// AR(p) coefficients from the Yule-Walker equations (Levinson-Durbin on the
/// biased sample autocovariances). Zero-variance input yields zeros.
pub fn yule_walker(z: &[f64], p: usize) -> Vec<f64> {
    if p == 0 {
        return Vec::new();
    }
    let n = z.len();
    let (mean, _) = mean_sd(z);
    let acov: Vec<f64> = (0..=p)
        .map(|k| {
            if k >= n {
                return 0.0;
            }
            (k..n).map(|t| (z[t] - mean) * (z[t - k] - mean)).sum::<f64>() / n as f64
        })
        .collect();
    if acov[0] <= 0.0 {
        return vec![0.0; p];
    }
    let mut phi = vec![0.0; p];
    let mut err = acov[0];
    for k in 1..=p {
        let mut acc = acov[k];
        for j in 1..k {
            acc -= phi[j - 1] * acov[k - j];
        }
        let reflection = acc / err;
        let prev = phi.clone();
        phi[k - 1] = reflection;
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - reflection * prev[k - j - 1];
        }
        err *= 1.0 - reflection * reflection;
        if err <= 0.0 {
            break;
        }
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arima::{aic, css_residuals};
    use crate::synthetic::arma_series;

    #[test]
    fn recovers_ar1_coefficient() {
        let xs = arma_series(&[0.7], &[], 0.0, 1.0, 500, 3);
        let m = fit(&xs, ArimaOrder::new(1, 0, 0), &FitOptions::default()).unwrap();
        assert!((m.phi[0] - 0.7).abs() < 0.1, "{}", m.phi[0]);
        assert!(m.fit_report.converged);
        assert!(m.fit_report.stationary);
        assert_eq!(m.sigma2, m.sse / m.n_eff as f64);
        assert_eq!(m.n_eff, 499);
    }

    #[test]
    fn random_walk_intercept_is_mean_step() {
        let xs = arma_series(&[], &[], 0.3, 1.0, 200, 8);
        let walk: Vec<f64> = xs.iter().scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        }).collect();
        let m = fit(&walk, ArimaOrder::new(0, 1, 0), &FitOptions::default()).unwrap();
        assert!(m.phi.is_empty() && m.theta.is_empty());
        let steps: Vec<f64> = walk.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = steps.iter().sum::<f64>() / steps.len() as f64;
        assert!((m.c - mean).abs() < 1e-6 * mean.abs().max(1.0), "{} vs {}", m.c, mean);
        assert_eq!(m.last_values, vec![*walk.last().unwrap()]);
    }

    #[test]
    fn constant_series_flags_zero_variance() {
        let xs = vec![4.0; 30];
        match fit(&xs, ArimaOrder::new(1, 0, 0), &FitOptions::default()) {
            Err(ArimaError::Diverged) => {}
            Ok(m) => {
                assert!(m.fit_report.zero_variance);
                assert_eq!(m.fit_report.aic, None);
                assert!(aic(&m).is_err());
            }
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn minimum_length_enforced() {
        let xs = vec![1.0; 12];
        assert!(matches!(
            fit(&xs, ArimaOrder::new(2, 1, 1), &FitOptions::default()),
            Err(ArimaError::TooShort { need: 14, got: 12 })
        ));
    }

    #[test]
    fn optimum_is_a_local_minimum() {
        let xs = arma_series(&[0.5], &[0.4], 0.2, 1.0, 300, 21);
        let order = ArimaOrder::new(1, 0, 1);
        let m = fit(&xs, order, &FitOptions::default()).unwrap();
        let base = css_residuals(&xs, order, &m.phi, &m.theta, m.c).unwrap().sse;
        assert_eq!(base, m.sse);
        let mut rng = crate::rng::SplitMix64::new(5);
        for _ in 0..100 {
            let mut dir: Vec<f64> = (0..3).map(|_| rng.next_gaussian()).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|v| *v *= 0.05 / norm);
            let sse = css_residuals(&xs, order, &[m.phi[0] + dir[0]], &[m.theta[0] + dir[1]], m.c + dir[2])
                .unwrap()
                .sse;
            assert!(sse >= base, "{sse} < {base}");
        }
    }

    #[test]
    fn deterministic() {
        let xs = arma_series(&[0.3, 0.2], &[0.3], 1.0, 2.0, 120, 4);
        let order = ArimaOrder::new(2, 0, 1);
        let a = fit(&xs, order, &FitOptions::default()).unwrap();
        let b = fit(&xs, order, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn yule_walker_ar1() {
        let xs = arma_series(&[0.6], &[], 0.0, 1.0, 5000, 2);
        let phi = yule_walker(&xs, 1);
        assert!((phi[0] - 0.6).abs() < 0.05);
        assert_eq!(yule_walker(&[3.0; 10], 2), vec![0.0, 0.0]);
    }
}
