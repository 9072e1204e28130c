use super::diff::{difference, integrate_continuation};
use super::ArimaModel;

/// Multi-step forecast in original units. Future innovations are zero; the
/// recursion runs on the differenced scale from the stored tail and is then
/// integrated onto the last observed value of each difference level.
pub fn forecast(model: &ArimaModel, horizon: usize) -> Vec<f64> {
    if horizon == 0 {
        return Vec::new();
    }
    let ArimaModel {
        order,
        phi,
        theta,
        c,
        last_values,
        residual_tail,
        ..
    } = model;
    let (p, d) = (order.p, order.d);

    let mut tail_levels = Vec::with_capacity(d);
    let mut level = last_values.clone();
    for _ in 0..d {
        tail_levels.push(*level.last().expect("last_values holds d + p values"));
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
    }
    debug_assert_eq!(level.len(), p);
    debug_assert_eq!(difference(last_values, d).map(|r| r.0).unwrap_or_default(), level);

    // history[..p] are observed z, residuals[..q] observed e.
    let mut z = level;
    let mut e = residual_tail.clone();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut v = *c;
        for (i, ph) in phi.iter().enumerate() {
            v += ph * z[z.len() - 1 - i];
        }
        for (j, th) in theta.iter().enumerate() {
            if let Some(k) = e.len().checked_sub(j + 1) {
                v += th * e[k];
            }
        }
        z.push(v);
        e.push(0.0);
        out.push(v);
    }
    integrate_continuation(&out, &tail_levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arima::{fit, ArimaFitReport, ArimaOrder, FitOptions};
    use crate::synthetic::arma_series;

    fn bare(order: ArimaOrder, phi: Vec<f64>, theta: Vec<f64>, c: f64, last: Vec<f64>, res: Vec<f64>) -> ArimaModel {
        ArimaModel {
            order,
            phi,
            theta,
            c,
            sigma2: 1.0,
            sse: 1.0,
            n_eff: 1,
            anchors: vec![0.0; order.d],
            last_values: last,
            residual_tail: res,
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
    fn random_walk_is_flat() {
        let m = bare(ArimaOrder::new(0, 1, 0), vec![], vec![], 0.0, vec![17.25], vec![]);
        assert_eq!(forecast(&m, 5), vec![17.25; 5]);
        assert!(forecast(&m, 0).is_empty());
    }

    #[test]
    fn mean_model() {
        let m = bare(ArimaOrder::new(0, 0, 0), vec![], vec![], 3.5, vec![], vec![]);
        assert_eq!(forecast(&m, 4), vec![3.5; 4]);
    }

    #[test]
    fn ar1_decays_geometrically_on_differences() {
        // Differenced AR(1), phi = 0.5, c = 0; last level 10, last difference 4.
        let m = bare(ArimaOrder::new(1, 1, 0), vec![0.5], vec![], 0.0, vec![6.0, 10.0], vec![]);
        let f = forecast(&m, 3);
        assert_eq!(f, vec![12.0, 13.0, 13.5]);
    }

    #[test]
    fn ma_term_uses_last_residual_once() {
        let m = bare(ArimaOrder::new(0, 0, 1), vec![], vec![0.5], 1.0, vec![], vec![2.0]);
        assert_eq!(forecast(&m, 3), vec![2.0, 1.0, 1.0]);
    }

    #[test]
    fn converges_to_unconditional_mean() {
        let xs = arma_series(&[0.6, -0.2], &[], 2.0, 1.0, 400, 12);
        let m = fit(&xs, ArimaOrder::new(2, 0, 0), &FitOptions::default()).unwrap();
        assert!(m.fit_report.ar_root_moduli.iter().all(|r| *r > 1.05));
        let mu = m.c / (1.0 - m.phi.iter().sum::<f64>());
        let f = forecast(&m, 200);
        assert!((f[199] - mu).abs() < 1e-6, "{} vs {mu}", f[199]);
    }
}
