use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::arima::{fit, fit_with_exog, forecast, select_order, ArimaModel, ArimaOrder, ArimaxModel, FitOptions, SelectConfig};
use crate::evm::{evm_forecast, EvmForecast, EvmSnapshot};
use crate::features::{is_known_in_advance, rolling_column_of, FeatureTable, COST_VARIANCE, EARNED_VALUE, PLANNED_VALUE};
use crate::lstm::{LstmModel, TrainConfig, WindowSpec};

fn default_caps() -> ArimaOrder {
    ArimaOrder::default_caps()
}

fn default_window() -> usize {
    4
}

fn default_rolling() -> usize {
    3
}

/// A forecasting model and its fixed hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Index extrapolation from the last cumulative CPI and SPI.
    Evm,
    /// ARIMA on the target; `order: None` selects the order by AIC on each
    /// training segment.
    Arima {
        #[serde(default)]
        order: Option<ArimaOrder>,
        #[serde(default = "default_caps")]
        caps: ArimaOrder,
        #[serde(default)]
        optimizer: FitOptions,
    },
    /// OLS on known-in-advance columns followed by ARIMA on the residuals.
    ArimaExog {
        exog: Vec<String>,
        #[serde(default)]
        order: Option<ArimaOrder>,
        #[serde(default = "default_caps")]
        caps: ArimaOrder,
        #[serde(default)]
        optimizer: FitOptions,
    },
    Lstm {
        /// Input columns; empty means the target alone.
        #[serde(default)]
        features: Vec<String>,
        #[serde(default = "default_window")]
        window: usize,
        #[serde(default = "default_rolling")]
        rolling_window: usize,
        #[serde(default)]
        train: TrainConfig,
    },
    /// Returns the true future values; a harness check, not a model.
    Oracle,
    Constant {
        value: f64,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Evm => "evm",
            ModelSpec::Arima { .. } => "arima",
            ModelSpec::ArimaExog { .. } => "arima-exog",
            ModelSpec::Lstm { .. } => "lstm",
            ModelSpec::Oracle => "oracle",
            ModelSpec::Constant { .. } => "constant",
        }
    }

    pub fn arima_auto() -> Self {
        ModelSpec::Arima {
            order: None,
            caps: default_caps(),
            optimizer: FitOptions::default(),
        }
    }

    pub fn arima_exog_auto(exog: &[&str]) -> Self {
        ModelSpec::ArimaExog {
            exog: exog.iter().map(|s| s.to_string()).collect(),
            order: None,
            caps: default_caps(),
            optimizer: FitOptions::default(),
        }
    }

    pub fn lstm(features: &[&str]) -> Self {
        ModelSpec::Lstm {
            features: features.iter().map(|s| s.to_string()).collect(),
            window: default_window(),
            rolling_window: default_rolling(),
            train: TrainConfig::default(),
        }
    }

    /// Columns whose future values the model reads. All except the oracle's
    /// target must be known in advance.
    pub fn future_columns(&self, target: &str) -> Vec<String> {
        match self {
            ModelSpec::Evm => vec![PLANNED_VALUE.to_string()],
            ModelSpec::ArimaExog { exog, .. } => exog.clone(),
            ModelSpec::Lstm { features, .. } => features
                .iter()
                .filter(|f| f.as_str() != target && rolling_column_of(target) != Some(f.as_str()))
                .cloned()
                .collect(),
            ModelSpec::Oracle => vec![target.to_string()],
            ModelSpec::Arima { .. } | ModelSpec::Constant { .. } => Vec::new(),
        }
    }

    /// Rejects future inputs that would leak information unavailable at
    /// forecast time.
    pub fn check_leakage(&self, target: &str) -> Result<(), EvalError> {
        if matches!(self, ModelSpec::Oracle) {
            return Ok(());
        }
        match self.future_columns(target).into_iter().find(|c| !is_known_in_advance(c)) {
            Some(c) => Err(EvalError::Leakage(c)),
            None => Ok(()),
        }
    }
}

/// A fitted model, serializable for persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FittedModel {
    Evm { last: EvmSnapshot, forecast: EvmForecast },
    Arima { model: ArimaModel },
    ArimaExog { model: ArimaxModel },
    Lstm { model: Box<LstmModel> },
    Oracle,
    Constant { value: f64 },
}

fn column<'a>(table: &'a FeatureTable, name: &str) -> Result<&'a [f64], EvalError> {
    table.column(name).ok_or_else(|| EvalError::UnknownColumn(name.to_string()))
}

fn future_column<'a>(future: &'a BTreeMap<String, Vec<f64>>, name: &str, horizon: usize) -> Result<&'a [f64], EvalError> {
    match future.get(name) {
        Some(v) if v.len() >= horizon => Ok(&v[..horizon]),
        _ => Err(EvalError::MissingFuture(name.to_string())),
    }
}

/// Largest caps that the series length supports, never above `caps`.
fn feasible_caps(caps: ArimaOrder, len: usize) -> ArimaOrder {
    let mut c = caps;
    while c.min_length() > len && (c.p > 0 || c.q > 0) {
        if c.p >= c.q {
            c.p -= 1;
        } else {
            c.q -= 1;
        }
    }
    c
}

fn choose_order(series: &[f64], order: Option<ArimaOrder>, caps: ArimaOrder, optimizer: &FitOptions) -> Result<ArimaOrder, EvalError> {
    match order {
        Some(o) => Ok(o),
        None => {
            let cfg = SelectConfig {
                optimizer: *optimizer,
                ..SelectConfig::with_caps(feasible_caps(caps, series.len()))
            };
            Ok(select_order(series, &cfg)?.0)
        }
    }
}

/// Fits `spec` on `history` and forecasts the next `horizon` values of
/// `target`. `future` holds the future values of the columns listed by
/// [`ModelSpec::future_columns`]; `seed` drives any randomness.
pub fn fit_forecast(
    spec: &ModelSpec,
    history: &FeatureTable,
    target: &str,
    horizon: usize,
    future: &BTreeMap<String, Vec<f64>>,
    seed: u64,
) -> Result<(Vec<f64>, FittedModel), EvalError> {
    spec.check_leakage(target)?;
    let y = column(history, target)?;
    match spec {
        ModelSpec::Evm => {
            if target != COST_VARIANCE && target != EARNED_VALUE {
                return Err(EvalError::UnsupportedTarget {
                    model: spec.name().into(),
                    target: target.into(),
                });
            }
            let pv = column(history, PLANNED_VALUE)?;
            let ev = column(history, EARNED_VALUE)?;
            let cv = column(history, COST_VARIANCE)?;
            let snapshots: Vec<EvmSnapshot> = (0..history.len())
                .map(|t| EvmSnapshot {
                    period: t,
                    pv: pv[t],
                    ev: ev[t],
                    ac: ev[t] - cv[t],
                })
                .collect();
            let pv_future = future_column(future, PLANNED_VALUE, horizon)?;
            let f = evm_forecast(&snapshots, pv_future, horizon)?;
            let path = if target == COST_VARIANCE { f.cv.clone() } else { f.ev.clone() };
            let last = *snapshots.last().expect("non-empty history");
            Ok((path, FittedModel::Evm { last, forecast: f }))
        }
        ModelSpec::Arima { order, caps, optimizer } => {
            let o = choose_order(y, *order, *caps, optimizer)?;
            let model = fit(y, o, optimizer)?;
            Ok((forecast(&model, horizon), FittedModel::Arima { model }))
        }
        ModelSpec::ArimaExog {
            exog,
            order,
            caps,
            optimizer,
        } => {
            let cols: Vec<Vec<f64>> = exog.iter().map(|c| column(history, c).map(<[f64]>::to_vec)).collect::<Result<_, _>>()?;
            let futures: Vec<Vec<f64>> = exog
                .iter()
                .map(|c| future_column(future, c, horizon).map(<[f64]>::to_vec))
                .collect::<Result<_, _>>()?;
            let o = match order {
                Some(o) => *o,
                None => {
                    let residuals = if cols.is_empty() { y.to_vec() } else { crate::arima::ols(y, &cols)?.residuals };
                    choose_order(&residuals, None, *caps, optimizer)?
                }
            };
            let model = fit_with_exog(y, &cols, exog, o, optimizer)?;
            let path = model.forecast(&futures, horizon)?;
            Ok((path, FittedModel::ArimaExog { model }))
        }
        ModelSpec::Lstm {
            features,
            window,
            rolling_window,
            train,
        } => {
            let features: Vec<String> = if features.is_empty() { vec![target.to_string()] } else { features.clone() };
            let spec = WindowSpec {
                window: *window,
                features,
                target: target.to_string(),
                horizon: horizon.max(1),
                rolling_window: *rolling_window,
            };
            let cfg = TrainConfig {
                seed,
                ..train.clone()
            };
            let model = LstmModel::fit(history, &spec, &cfg)?;
            let path = model.forecast(history, horizon, future)?;
            Ok((path, FittedModel::Lstm { model: Box::new(model) }))
        }
        ModelSpec::Oracle => {
            let truth = future_column(future, target, horizon)?;
            Ok((truth.to_vec(), FittedModel::Oracle))
        }
        ModelSpec::Constant { value } => Ok((vec![*value; horizon], FittedModel::Constant { value: *value })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::WEATHER_PATTERN;

    #[test]
    fn leakage_guard() {
        let lstm = ModelSpec::lstm(&[COST_VARIANCE, EARNED_VALUE]);
        assert!(matches!(lstm.check_leakage(COST_VARIANCE), Err(EvalError::Leakage(c)) if c == EARNED_VALUE));
        let ok = ModelSpec::lstm(&[COST_VARIANCE, "rolling_avg_cost_variance", WEATHER_PATTERN]);
        assert!(ok.check_leakage(COST_VARIANCE).is_ok());
        let ax = ModelSpec::arima_exog_auto(&[EARNED_VALUE]);
        assert!(matches!(ax.check_leakage(COST_VARIANCE), Err(EvalError::Leakage(_))));
        assert!(ModelSpec::Oracle.check_leakage(COST_VARIANCE).is_ok());
    }

    #[test]
    fn feasible_caps_shrink() {
        let c = feasible_caps(ArimaOrder::new(3, 2, 3), 14);
        assert!(c.min_length() <= 14);
        assert_eq!(feasible_caps(ArimaOrder::new(3, 2, 3), 100), ArimaOrder::new(3, 2, 3));
    }

    #[test]
    fn evm_on_plan_gives_zero_cv() {
        let mut t = FeatureTable::new(4);
        t.push(PLANNED_VALUE, vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        t.push(EARNED_VALUE, vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        t.push(COST_VARIANCE, vec![0.0; 4]).unwrap();
        let future: BTreeMap<String, Vec<f64>> = [(PLANNED_VALUE.to_string(), vec![50.0, 60.0])].into_iter().collect();
        let (p, _) = fit_forecast(&ModelSpec::Evm, &t, COST_VARIANCE, 2, &future, 0).unwrap();
        assert_eq!(p, vec![0.0, 0.0]);
        let err = fit_forecast(&ModelSpec::Evm, &t, COST_VARIANCE, 2, &BTreeMap::new(), 0).unwrap_err();
        assert!(matches!(err, EvalError::MissingFuture(_)));
    }

    #[test]
    fn spec_json_shapes() {
        let s: ModelSpec = serde_json::from_str(r#"{"kind":"arima","order":{"p":1,"d":1,"q":0}}"#).unwrap();
        assert_eq!(s.name(), "arima");
        let s: ModelSpec = serde_json::from_str(r#"{"kind":"lstm","window":3}"#).unwrap();
        assert!(matches!(s, ModelSpec::Lstm { window: 3, .. }));
        assert!(serde_json::from_str::<ModelSpec>(r#"{"kind":"arima","bogus":1}"#).is_err());
    }
}
