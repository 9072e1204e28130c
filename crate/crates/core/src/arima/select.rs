use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diff::difference;
use super::estimate::{fit_conditioned, FitOptions};
use super::{ArimaError, ArimaOrder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    pub caps: ArimaOrder,
    /// Differencing stops at the first `d` whose lag-1 autocorrelation is
    /// below this value.
    pub acf_threshold: f64,
    /// Candidates with an AR or MA root of modulus at or below this value are
    /// skipped when a candidate clear of the unit circle exists. Near-unit
    /// root pairs that almost cancel otherwise win on conditional-sum-of-squares
    /// AIC without describing the data any better.
    pub root_margin: f64,
    pub optimizer: FitOptions,
    /// Fit grid points concurrently; results are merged in grid order.
    pub parallel: bool,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            caps: ArimaOrder::default_caps(),
            acf_threshold: 0.9,
            root_margin: 1.01,
            optimizer: FitOptions::default(),
            parallel: false,
        }
    }
}

impl SelectConfig {
    pub fn with_caps(caps: ArimaOrder) -> Self {
        Self {
            caps,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub order: ArimaOrder,
    pub aic: Option<f64>,
    pub converged: bool,
    /// Smallest AR or MA root modulus, `None` for models without roots.
    pub min_root_modulus: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub d: usize,
    /// Lag-1 autocorrelation of the series differenced 0, 1, ... times.
    pub lag1_autocorrelations: Vec<f64>,
    pub entries: Vec<GridEntry>,
}

/// Sample lag-1 autocorrelation; zero for a constant series.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let denom: f64 = xs.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    num / denom
}

/// Chooses `d` by the lag-1 autocorrelation rule, then fits every `(p, q)`
/// up to the caps and returns the minimum-AIC order. Ties go to the smaller
/// `p + q`, then the smaller `p`. Candidates with roots near the unit circle
/// (see [`SelectConfig::root_margin`]) only win when nothing else fits. All candidates condition on the first
/// `caps.p` differenced values so their AIC values share one sample.
pub fn select_order(series: &[f64], cfg: &SelectConfig) -> Result<(ArimaOrder, GridReport), ArimaError> {
    let caps = cfg.caps;
    let mut lag1 = Vec::new();
    let mut d = caps.d;
    for k in 0..=caps.d {
        let (z, _) = difference(series, k)?;
        let r = lag1_autocorrelation(&z);
        lag1.push(r);
        if r < cfg.acf_threshold {
            d = k;
            break;
        }
    }
    let largest = ArimaOrder::new(caps.p, d, caps.q);
    if series.len() < largest.min_length() {
        return Err(ArimaError::TooShort {
            need: largest.min_length(),
            got: series.len(),
        });
    }

    let grid: Vec<ArimaOrder> = (0..=caps.p)
        .flat_map(|p| (0..=caps.q).map(move |q| ArimaOrder::new(p, d, q)))
        .collect();
    let run = |order: &ArimaOrder| match fit_conditioned(series, *order, &cfg.optimizer, caps.p) {
        Ok(m) => GridEntry {
            order: *order,
            aic: m.fit_report.aic,
            converged: m.fit_report.converged,
            min_root_modulus: m
                .fit_report
                .ar_root_moduli
                .iter()
                .chain(&m.fit_report.ma_root_moduli)
                .copied()
                .reduce(f64::min),
            error: None,
        },
        Err(e) => GridEntry {
            order: *order,
            aic: None,
            converged: false,
            min_root_modulus: None,
            error: Some(e.to_string()),
        },
    };
    let entries: Vec<GridEntry> = if cfg.parallel {
        grid.par_iter().map(run).collect()
    } else {
        grid.iter().map(run).collect()
    };

    let admissible = |e: &GridEntry| e.min_root_modulus.is_none_or(|m| m > cfg.root_margin);
    let argmin = |clear_only: bool| {
        entries
            .iter()
            .filter(|e| !clear_only || admissible(e))
            .filter_map(|e| e.aic.filter(|a| a.is_finite()).map(|a| (a, e.order)))
            .min_by(|(a, x), (b, y)| {
                a.total_cmp(b)
                    .then((x.p + x.q).cmp(&(y.p + y.q)))
                    .then(x.p.cmp(&y.p))
            })
            .map(|(_, o)| o)
    };
    let best = argmin(true)
        .or_else(|| argmin(false))
        .ok_or(ArimaError::NoValidCandidate)?;
    Ok((
        best,
        GridReport {
            d,
            lag1_autocorrelations: lag1,
            entries,
        },
    ))
}
