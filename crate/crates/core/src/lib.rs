//! Project performance forecasting.
//!
//! Period-indexed project data (planned value, earned value, actual cost) is
//! ingested and cleaned by [`data`], turned into a model-ready
//! [`features::FeatureTable`], and forecast by three model families: the
//! earned-value index baseline ([`evm`]), ARIMA ([`arima`]) and a small LSTM
//! ([`lstm`]). [`evaluation`] scores them under blocked k-fold and
//! walk-forward cross-validation, and [`explain`] attributes predictions to
//! features with exact Shapley values.

pub mod arima;
pub mod data;
pub mod evaluation;
pub mod evm;
pub mod explain;
pub mod features;
pub mod lstm;
pub mod optim;
pub mod rng;
pub mod synthetic;
