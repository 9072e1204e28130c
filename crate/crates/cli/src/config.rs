use std::path::{Path, PathBuf};

use pforecast::data::{CleanPolicy, ColumnMap};
use pforecast::evaluation::{CvConfig, ModelSpec};
use pforecast::features::{
    ExogConfig, FEATURE_COLUMNS, PLANNED_VALUE, RESOURCE_AVAILABILITY, WEATHER_PATTERN, COST_VARIANCE,
};
use pforecast::lstm::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainModel {
    /// Ordinary least squares of the target on the features.
    Linear,
    /// LSTM attributed on the most recent window row.
    Lstm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub model: ExplainModel,
    /// Feature columns; empty means all eleven table columns.
    pub features: Vec<String>,
    /// LSTM window length.
    pub window: usize,
    pub train: TrainConfig,
    /// Explain only the last `n` instances; `None` explains all.
    pub last: Option<usize>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            model: ExplainModel::Lstm,
            features: Vec::new(),
            window: 4,
            train: TrainConfig::default(),
            last: None,
        }
    }
}

/// Everything a run needs. Loaded from JSON; command-line flags override
/// individual fields afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub columns: ColumnMap,
    /// Keep one WBS label; without it, multi-label data is summed per period.
    pub wbs: Option<String>,
    pub target: String,
    /// Rolling-average window of the derived feature columns.
    pub window: usize,
    pub exog: ExogConfig,
    pub clean: CleanPolicy,
    /// Root seed for model training and cross-validation folds.
    pub seed: u64,
    pub models: Vec<ModelSpec>,
    pub cv: CvConfig,
    pub horizon: usize,
    pub out: PathBuf,
    /// Future plan (`period,planned_value[,estimate_cost,weather_pattern,
    /// resource_availability]`). With a plan, `forecast` extends past the
    /// data; without one it forecasts the last `horizon` observed periods.
    pub plan: Option<PathBuf>,
    /// `period,label` markers drawn on the forecast chart.
    pub annotations: Option<PathBuf>,
    pub explain: ExplainConfig,
    /// Use an ingested `cost_variance` column in the statistics tables
    /// instead of EV - AC.
    pub supplied_cost_variance: bool,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            columns: ColumnMap::default(),
            wbs: None,
            target: COST_VARIANCE.to_string(),
            window: 3,
            exog: ExogConfig::default(),
            clean: CleanPolicy::default(),
            seed: 0,
            models: ["evm", "arima", "lstm"].iter().map(|m| default_model(m, COST_VARIANCE).expect("known model")).collect(),
            cv: CvConfig::default(),
            horizon: 6,
            out: PathBuf::from("out"),
            plan: None,
            annotations: None,
            explain: ExplainConfig::default(),
            supplied_cost_variance: false,
            parallel: false,
        }
    }
}

/// The model a `--models` name stands for, with default hyperparameters.
pub fn default_model(name: &str, target: &str) -> Result<ModelSpec, CliError> {
    let exog = [PLANNED_VALUE, WEATHER_PATTERN, RESOURCE_AVAILABILITY];
    Ok(match name {
        "evm" => ModelSpec::Evm,
        "arima" => ModelSpec::arima_auto(),
        "arima-exog" => ModelSpec::arima_exog_auto(&exog),
        "lstm" => {
            let mut features = vec![target];
            features.extend(pforecast::features::rolling_column_of(target));
            features.extend(exog);
            ModelSpec::lstm(&features)
        }
        "oracle" => ModelSpec::Oracle,
        "constant" => ModelSpec::Constant { value: 0.0 },
        other => {
            return Err(CliError::Config(format!(
                "unknown model {other:?}; expected evm, arima, arima-exog, lstm, oracle or constant"
            )))
        }
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !FEATURE_COLUMNS.contains(&self.target.as_str()) {
            return bad(format!("target {:?} is not a feature column ({})", self.target, FEATURE_COLUMNS.join(", ")));
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if self.models.is_empty() {
            return bad("no models selected".into());
        }
        for m in &self.models {
            if let Err(e) = m.check_leakage(&self.target) {
                return bad(format!("model {}: {e}", m.name()));
            }
            if let ModelSpec::Lstm { train, .. } = m {
                train.validate().map_err(|e| CliError::Config(format!("model lstm: {e}")))?;
            }
        }
        let mut names: Vec<&str> = self.models.iter().map(ModelSpec::name).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("each model kind may appear once".into());
        }
        self.exog.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.explain.train.validate().map_err(|e| CliError::Config(format!("explain: {e}")))?;
        if self.explain.window == 0 {
            return bad("explain window must be at least 1".into());
        }
        for f in &self.explain.features {
            if !FEATURE_COLUMNS.contains(&f.as_str()) {
                return bad(format!("explain feature {f:?} is not a feature column"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"horizn": 3}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"horizon": 3, "models": [{"kind": "evm"}]}"#).unwrap();
        assert_eq!((c.horizon, c.models.len()), (3, 1));
    }

    #[test]
    fn leaky_model_rejected() {
        let c = RunConfig {
            models: vec![ModelSpec::arima_exog_auto(&["earned_value"])],
            ..RunConfig::default()
        };
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }
}
