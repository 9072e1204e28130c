//! Earned value management indicators and the index-extrapolation baseline.
//!
//! All indices use cumulative-to-date values. Ratios whose denominator is
//! zero are `None`, never NaN.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvmError {
    #[error("empty history")]
    EmptyHistory,
    #[error("CPI or SPI undefined at the last snapshot (ac = {ac}, pv = {pv})")]
    DegenerateIndices { ac: f64, pv: f64 },
    #[error("planned value path has {got} entries, horizon needs {need}")]
    ShortPlan { got: usize, need: usize },
    #[error("invalid snapshot at period {0}: values must be finite and non-negative")]
    InvalidSnapshot(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvmSnapshot {
    pub period: usize,
    pub pv: f64,
    pub ev: f64,
    pub ac: f64,
}

impl EvmSnapshot {
    pub fn is_valid(&self) -> bool {
        [self.pv, self.ev, self.ac].iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvmIndices {
    pub cv: f64,
    pub sv: f64,
    pub cpi: Option<f64>,
    pub spi: Option<f64>,
}

pub fn compute_indices(s: &EvmSnapshot) -> EvmIndices {
    EvmIndices {
        cv: s.ev - s.ac,
        sv: s.ev - s.pv,
        cpi: (s.ac != 0.0).then(|| s.ev / s.ac),
        spi: (s.pv != 0.0).then(|| s.ev / s.pv),
    }
}

/// Extrapolated paths for steps `1..=horizon` past the last snapshot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvmForecast {
    pub ev: Vec<f64>,
    pub ac: Vec<f64>,
    pub cv: Vec<f64>,
    pub cpi: f64,
    pub spi: f64,
}

/// Future work is earned at the current cumulative SPI and paid for at the
/// current cumulative CPI:
///
/// ```text
/// EV(t+h) = EV(t) + (PV(t+h) - PV(t)) * SPI(t)
/// AC(t+h) = AC(t) + (EV(t+h) - EV(t)) / CPI(t)
/// CV(t+h) = EV(t+h) - AC(t+h)
/// ```
///
/// `pv_future[h-1]` is the cumulative planned value `h` periods ahead.
pub fn evm_forecast(history: &[EvmSnapshot], pv_future: &[f64], horizon: usize) -> Result<EvmForecast, EvmError> {
    let last = history.last().ok_or(EvmError::EmptyHistory)?;
    if let Some(bad) = history.iter().find(|s| !s.is_valid()) {
        return Err(EvmError::InvalidSnapshot(bad.period));
    }
    let idx = compute_indices(last);
    let (Some(cpi), Some(spi)) = (idx.cpi, idx.spi) else {
        return Err(EvmError::DegenerateIndices { ac: last.ac, pv: last.pv });
    };
    if cpi <= 0.0 {
        // ev = 0 with ac > 0: nothing earned yet, the cost rate is unbounded.
        return Err(EvmError::DegenerateIndices { ac: last.ac, pv: last.pv });
    }
    if pv_future.len() < horizon {
        return Err(EvmError::ShortPlan {
            got: pv_future.len(),
            need: horizon,
        });
    }
    let mut out = EvmForecast {
        cpi,
        spi,
        ..EvmForecast::default()
    };
    for &pv in &pv_future[..horizon] {
        let ev = last.ev + (pv - last.pv) * spi;
        let ac = last.ac + (ev - last.ev) / cpi;
        out.ev.push(ev);
        out.ac.push(ac);
        out.cv.push(ev - ac);
    }
    Ok(out)
}
