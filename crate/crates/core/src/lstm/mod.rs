//! Single- or multi-layer LSTM regressor trained by backpropagation through
//! time, with seeded initialization and recursive multi-step forecasting.

mod net;
mod train;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::NormParams;
use crate::features::{rolling_column_of, trailing_mean, FeatureTable};

pub use net::{backward, forward, gradient_relative_errors, numeric_gradient, ForwardCache, Gate, LstmLayer, LstmParams, Matrix};
pub use train::{train, EpochLoss, Optimizer, TrainConfig, Trained};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LstmError {
    #[error("table has {got} rows, window needs at least {need}")]
    TooShort { need: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty training dataset")]
    EmptyDataset,
    #[error("training loss became non-finite at epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("future values of column {0} are required for the forecast horizon")]
    MissingFutureExog(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn default_rolling_window() -> usize {
    3
}

/// Supervised framing: `window` consecutive rows of `features` predict
/// `target` one period later. `rolling_window` is the window of the
/// rolling-average feature of the target, which forecasting recomputes from
/// predicted values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub window: usize,
    pub features: Vec<String>,
    pub target: String,
    pub horizon: usize,
    #[serde(default = "default_rolling_window")]
    pub rolling_window: usize,
}

impl WindowSpec {
    pub fn new(window: usize, features: &[&str], target: &str, horizon: usize) -> Self {
        Self {
            window,
            features: features.iter().map(|s| s.to_string()).collect(),
            target: target.to_string(),
            horizon,
            rolling_window: default_rolling_window(),
        }
    }

    pub fn validate(&self, table: &FeatureTable) -> Result<(), LstmError> {
        if self.window < 1 || self.horizon < 1 || self.rolling_window < 1 {
            return Err(LstmError::InvalidConfig("window, horizon and rolling window must be at least 1".into()));
        }
        if self.features.is_empty() {
            return Err(LstmError::InvalidConfig("no input features".into()));
        }
        for name in self.features.iter().chain(std::iter::once(&self.target)) {
            if table.column(name).is_none() {
                return Err(LstmError::UnknownColumn(name.clone()));
            }
        }
        Ok(())
    }

    /// Feature columns plus the target, without duplicates.
    fn columns(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.features.iter().map(String::as_str).collect();
        if !out.contains(&self.target.as_str()) {
            out.push(&self.target);
        }
        out
    }
}

/// One supervised example: `inputs[t][f]` for `t` in the window, normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<Vec<f64>>,
    pub target: f64,
}

/// Min-max parameters of every feature and the target, fitted on `table`
/// (callers pass the training rows only).
pub fn fit_normalization(table: &FeatureTable, spec: &WindowSpec) -> Result<BTreeMap<String, NormParams>, LstmError> {
    spec.validate(table)?;
    spec.columns()
        .into_iter()
        .map(|name| {
            let col = table.column(name).ok_or_else(|| LstmError::UnknownColumn(name.to_string()))?;
            let p = NormParams::fit(col).map_err(|e| LstmError::InvalidConfig(format!("column {name}: {e}")))?;
            Ok((name.to_string(), p))
        })
        .collect()
}

/// Sliding windows over `table`: sample `k` reads rows `k..k+w` and targets
/// row `k+w`, giving `len - w` samples.
pub fn make_windows(table: &FeatureTable, spec: &WindowSpec, norm: &BTreeMap<String, NormParams>) -> Result<Vec<Sample>, LstmError> {
    spec.validate(table)?;
    let n = table.len();
    if n <= spec.window {
        return Err(LstmError::TooShort {
            need: spec.window + 1,
            got: n,
        });
    }
    let scaled = |name: &str| -> Result<Vec<f64>, LstmError> {
        let p = norm.get(name).ok_or_else(|| LstmError::UnknownColumn(name.to_string()))?;
        Ok(table.column(name).expect("validated").iter().map(|&v| p.scale(v)).collect())
    };
    let features: Vec<Vec<f64>> = spec.features.iter().map(|f| scaled(f)).collect::<Result<_, _>>()?;
    let target = scaled(&spec.target)?;
    Ok((0..n - spec.window)
        .map(|k| Sample {
            inputs: (k..k + spec.window).map(|t| features.iter().map(|c| c[t]).collect()).collect(),
            target: target[k + spec.window],
        })
        .collect())
}

/// A trained network with the framing and normalization it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub spec: WindowSpec,
    pub config: TrainConfig,
    pub norm: BTreeMap<String, NormParams>,
    pub params: LstmParams,
    pub history: Vec<EpochLoss>,
}

impl LstmModel {
    /// Fits normalization on `table`, frames it and trains.
    pub fn fit(table: &FeatureTable, spec: &WindowSpec, config: &TrainConfig) -> Result<Self, LstmError> {
        let norm = fit_normalization(table, spec)?;
        let samples = make_windows(table, spec, &norm)?;
        let trained = train(&samples, config)?;
        Ok(Self {
            spec: spec.clone(),
            config: config.clone(),
            norm,
            params: trained.params,
            history: trained.history,
        })
    }

    fn target_norm(&self) -> &NormParams {
        &self.norm[&self.spec.target]
    }

    /// Prediction in original units for one raw window (`window` rows of the
    /// feature columns, in spec order).
    pub fn predict_window(&self, raw: &[Vec<f64>]) -> Result<f64, LstmError> {
        let scaled: Vec<Vec<f64>> = raw
            .iter()
            .map(|row| row.iter().zip(&self.spec.features).map(|(v, f)| self.norm[f].scale(*v)).collect())
            .collect();
        let (y, _) = forward(&self.params, &scaled)?;
        Ok(self.target_norm().unscale(y))
    }

    /// Recursive forecast of the `horizon` periods after the end of `table`.
    ///
    /// Each prediction is appended to the target column. The target and its
    /// rolling average are recomputed from predictions; every other feature
    /// needs at least `horizon` values in `future`.
    pub fn forecast(&self, table: &FeatureTable, horizon: usize, future: &BTreeMap<String, Vec<f64>>) -> Result<Vec<f64>, LstmError> {
        if horizon == 0 {
            return Ok(Vec::new());
        }
        self.spec.validate(table)?;
        let w = self.spec.window;
        if table.len() < w {
            return Err(LstmError::TooShort { need: w, got: table.len() });
        }
        let target = self.spec.target.as_str();
        let rolling_target = rolling_column_of(target);
        for f in &self.spec.features {
            let derived = f == target || rolling_target == Some(f.as_str());
            if !derived && future.get(f).is_none_or(|v| v.len() < horizon) {
                return Err(LstmError::MissingFutureExog(f.clone()));
            }
        }
        let mut cols: BTreeMap<&str, Vec<f64>> = self
            .spec
            .columns()
            .into_iter()
            .map(|n| (n, table.column(n).expect("validated").to_vec()))
            .collect();
        let mut out = Vec::with_capacity(horizon);
        for h in 0..horizon {
            let len = cols[target].len();
            let window: Vec<Vec<f64>> = (len - w..len)
                .map(|t| self.spec.features.iter().map(|f| cols[f.as_str()][t]).collect())
                .collect();
            let y = self.predict_window(&window)?;
            out.push(y);
            cols.get_mut(target).expect("target column").push(y);
            for f in &self.spec.features {
                let f = f.as_str();
                if f == target {
                    continue;
                }
                let value = if rolling_target == Some(f) {
                    let t = &cols[target];
                    trailing_mean(t, t.len() - 1, self.spec.rolling_window)
                } else {
                    future[f][h]
                };
                cols.get_mut(f).expect("feature column").push(value);
            }
        }
        Ok(out)
    }
}
