//! Error metrics, time-ordered cross-validation and model comparison.

mod models;
mod report;

use serde::{Deserialize, Serialize};

use crate::arima::ArimaError;
use crate::evm::EvmError;
use crate::lstm::LstmError;

pub use models::{fit_forecast, FittedModel, ModelSpec};
pub use report::{compare, cross_validate, EvalReport, FoldResult, ModelReport, SplitSummary};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("length mismatch: {0} actual vs {1} predicted")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("series of length {got} is too short for the configuration (need {need})")]
    TooShort { need: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("column {0} is not known in advance and cannot be used as a future input")]
    Leakage(String),
    #[error("future values of {0} are required")]
    MissingFuture(String),
    #[error("model {model} cannot forecast target {target}")]
    UnsupportedTarget { model: String, target: String },
    #[error("reports are not comparable: {0}")]
    IncomparableReports(String),
    #[error(transparent)]
    Arima(#[from] ArimaError),
    #[error(transparent)]
    Lstm(#[from] LstmError),
    #[error(transparent)]
    Evm(#[from] EvmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
}

pub fn metrics(actual: &[f64], predicted: &[f64]) -> Result<Metrics, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = actual.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (a, p) in actual.iter().zip(predicted) {
        let e = a - p;
        abs += e.abs();
        sq += e * e;
    }
    let mse = sq / n;
    Ok(Metrics {
        mae: abs / n,
        mse,
        rmse: mse.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvMode {
    BlockedKfold,
    ExpandingWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub mode: CvMode,
    /// Fold count for blocked k-fold.
    pub k: usize,
    /// Initial training length for the expanding window.
    pub min_train: usize,
    /// Test block length for the expanding window.
    pub horizon: usize,
    /// Root seed; fold `i` uses `SplitMix64::derive_seed(seed, i)`.
    pub seed: u64,
    /// Run folds concurrently. Results are identical to a sequential run, so
    /// the flag is not written into serialized reports.
    #[serde(skip_serializing)]
    pub parallel: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            mode: CvMode::ExpandingWindow,
            k: 5,
            min_train: 12,
            horizon: 1,
            seed: 0,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Train/test index sets.
///
/// Blocked k-fold: `k` contiguous test blocks; the first `n % k` blocks hold
/// one extra index. Expanding window: split `s = 1, 2, ...` trains on
/// `0 .. min_train + (s-1)·horizon` and tests on the next `horizon` indices;
/// the last test block may be shorter.
pub fn split(n: usize, cfg: &CvConfig) -> Result<Vec<Split>, EvalError> {
    match cfg.mode {
        CvMode::BlockedKfold => {
            if cfg.k < 2 {
                return Err(EvalError::InvalidConfig(format!("blocked k-fold needs k >= 2, got {}", cfg.k)));
            }
            if n < cfg.k {
                return Err(EvalError::TooShort { need: cfg.k, got: n });
            }
            let (base, extra) = (n / cfg.k, n % cfg.k);
            let mut start = 0;
            Ok((0..cfg.k)
                .map(|i| {
                    let len = base + usize::from(i < extra);
                    let test: Vec<usize> = (start..start + len).collect();
                    let train = (0..start).chain(start + len..n).collect();
                    start += len;
                    Split { train, test }
                })
                .collect())
        }
        CvMode::ExpandingWindow => {
            if cfg.min_train < 1 || cfg.horizon < 1 {
                return Err(EvalError::InvalidConfig("min_train and horizon must be at least 1".into()));
            }
            if n <= cfg.min_train {
                return Err(EvalError::TooShort {
                    need: cfg.min_train + 1,
                    got: n,
                });
            }
            Ok((cfg.min_train..n)
                .step_by(cfg.horizon)
                .map(|start| Split {
                    train: (0..start).collect(),
                    test: (start..(start + cfg.horizon).min(n)).collect(),
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn metric_examples() {
        let m = metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((m.mae, m.mse, m.rmse), (0.0, 0.0, 0.0));
        let m = metrics(&[0.0, 0.0], &[1.0, -1.0]).unwrap();
        assert_eq!((m.mae, m.mse, m.rmse), (1.0, 1.0, 1.0));
        let m = metrics(&[2.0, 4.0], &[1.0, 1.0]).unwrap();
        assert_eq!((m.mae, m.mse, m.rmse), (2.0, 5.0, 5.0f64.sqrt()));
        assert!(matches!(metrics(&[1.0], &[]), Err(EvalError::LengthMismatch(1, 0))));
        assert!(matches!(metrics(&[], &[]), Err(EvalError::EmptyInput)));
    }

    fn blocked(k: usize) -> CvConfig {
        CvConfig {
            mode: CvMode::BlockedKfold,
            k,
            ..CvConfig::default()
        }
    }

    #[test]
    fn blocked_even_and_remainder() {
        let s = split(10, &blocked(5)).unwrap();
        assert_eq!(s.len(), 5);
        for (i, f) in s.iter().enumerate() {
            assert_eq!(f.test, vec![2 * i, 2 * i + 1]);
            assert_eq!(f.train.len(), 8);
        }
        let sizes: Vec<usize> = split(10, &blocked(3)).unwrap().iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        assert!(split(10, &blocked(1)).is_err());
        assert!(matches!(split(2, &blocked(3)), Err(EvalError::TooShort { .. })));
    }

    #[test]
    fn expanding_examples() {
        let cfg = CvConfig {
            min_train: 5,
            horizon: 1,
            ..CvConfig::default()
        };
        let s = split(10, &cfg).unwrap();
        assert_eq!(s.len(), 5);
        let sizes: Vec<usize> = s.iter().map(|f| f.train.len()).collect();
        assert_eq!(sizes, vec![5, 6, 7, 8, 9]);
        let cfg = CvConfig {
            min_train: 4,
            horizon: 4,
            ..CvConfig::default()
        };
        let tests: Vec<Vec<usize>> = split(10, &cfg).unwrap().into_iter().map(|f| f.test).collect();
        assert_eq!(tests, vec![vec![4, 5, 6, 7], vec![8, 9]]);
    }

    proptest! {
        #[test]
        fn metric_identities(pairs in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..60)) {
            let (a, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = metrics(&a, &p).unwrap();
            prop_assert!(m.mae >= 0.0 && m.rmse >= 0.0);
            prop_assert!((m.rmse * m.rmse - m.mse).abs() <= 1e-12 * m.mse.max(f64::MIN_POSITIVE));
            prop_assert!(m.mae <= m.rmse * (1.0 + 1e-12));
        }

        #[test]
        fn blocked_partition(n in 2usize..200, k in 2usize..12) {
            prop_assume!(n >= k);
            let s = split(n, &blocked(k)).unwrap();
            let mut all: Vec<usize> = s.iter().flat_map(|f| f.test.clone()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = s.iter().map(|f| f.test.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn expanding_never_leaks(n in 2usize..200, min_train in 1usize..50, horizon in 1usize..10) {
            prop_assume!(n > min_train);
            let cfg = CvConfig { min_train, horizon, ..CvConfig::default() };
            for f in split(n, &cfg).unwrap() {
                let last_train = *f.train.last().unwrap();
                prop_assert!(f.test.iter().all(|&t| t > last_train));
            }
        }
    }
}
