use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{metrics, split, CvConfig, EvalError, Metrics, ModelSpec, Split};
use crate::evaluation::fit_forecast;
use crate::features::{is_known_in_advance, FeatureTable};
use crate::rng::SplitMix64;

/// Where each fold trained and tested. Models always train on the
/// contiguous prefix that precedes the test block, so `train_len` equals
/// `test_start`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub fold: usize,
    pub train_len: usize,
    pub test_start: usize,
    pub test_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub seed: u64,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
    pub predictions: Vec<f64>,
    pub actual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub spec: ModelSpec,
    pub folds: Vec<FoldResult>,
    /// Unweighted mean over the folds that succeeded.
    pub mean: Option<Metrics>,
    /// Sample standard deviation over the folds that succeeded (0 for one).
    pub sd: Option<Metrics>,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub target: String,
    pub n: usize,
    pub cv: CvConfig,
    pub splits: Vec<SplitSummary>,
    pub models: Vec<ModelReport>,
    /// Model names by ascending mean RMSE, ties by name; models without a
    /// successful fold come last.
    pub ranking: Vec<String>,
}

fn summarize(splits: &[Split]) -> Vec<SplitSummary> {
    splits
        .iter()
        .enumerate()
        .map(|(fold, s)| {
            let test_start = s.test[0];
            SplitSummary {
                fold,
                train_len: test_start,
                test_start,
                test_len: s.test.len(),
            }
        })
        .collect()
}

fn run_fold(table: &FeatureTable, target: &str, spec: &ModelSpec, s: &SplitSummary, seed: u64) -> FoldResult {
    let range = s.test_start..s.test_start + s.test_len;
    let actual = table.column(target).map(|c| c[range.clone()].to_vec()).unwrap_or_default();
    let outcome: Result<_, EvalError> = (|| {
        let history = table.rows(0..s.train_len);
        let mut future = BTreeMap::new();
        for name in table.names() {
            if is_known_in_advance(name) || (name == target && matches!(spec, ModelSpec::Oracle)) {
                future.insert(name.to_string(), table.column(name).expect("listed column")[range.clone()].to_vec());
            }
        }
        let (pred, _) = fit_forecast(spec, &history, target, s.test_len, &future, seed)?;
        let m = metrics(&actual, &pred)?;
        Ok((pred, m))
    })();
    match outcome {
        Ok((predictions, m)) => FoldResult {
            fold: s.fold,
            seed,
            metrics: Some(m),
            error: None,
            predictions,
            actual,
        },
        Err(e) => FoldResult {
            fold: s.fold,
            seed,
            metrics: None,
            error: Some(e.to_string()),
            predictions: Vec::new(),
            actual,
        },
    }
}

fn aggregate(folds: &[FoldResult]) -> (Option<Metrics>, Option<Metrics>) {
    let ok: Vec<Metrics> = folds.iter().filter_map(|f| f.metrics).collect();
    if ok.is_empty() {
        return (None, None);
    }
    let n = ok.len() as f64;
    let stat = |get: fn(&Metrics) -> f64| {
        let mean = ok.iter().map(get).sum::<f64>() / n;
        let sd = if ok.len() < 2 {
            0.0
        } else {
            (ok.iter().map(|m| (get(m) - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        (mean, sd)
    };
    let (mae, mae_sd) = stat(|m| m.mae);
    let (mse, mse_sd) = stat(|m| m.mse);
    let (rmse, rmse_sd) = stat(|m| m.rmse);
    (
        Some(Metrics { mae, mse, rmse }),
        Some(Metrics {
            mae: mae_sd,
            mse: mse_sd,
            rmse: rmse_sd,
        }),
    )
}

fn rank(models: &[ModelReport]) -> Vec<String> {
    let mut order: Vec<&ModelReport> = models.iter().collect();
    order.sort_by(|a, b| match (a.mean, b.mean) {
        (Some(x), Some(y)) => x.rmse.total_cmp(&y.rmse).then_with(|| a.model.cmp(&b.model)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.model.cmp(&b.model),
    });
    order.into_iter().map(|m| m.model.clone()).collect()
}

/// Cross-validates one model on `target`.
///
/// Each fold fits on the rows before its test block and forecasts the whole
/// block from there. Known-in-advance columns are supplied at the test rows;
/// the target itself is supplied only to the oracle. In blocked k-fold the
/// first block has no earlier rows, so models that need history record a failure
/// for it. Fold `i` receives seed `SplitMix64::derive_seed(cfg.seed, i)`.
pub fn cross_validate(table: &FeatureTable, target: &str, spec: &ModelSpec, cfg: &CvConfig) -> Result<EvalReport, EvalError> {
    table.column(target).ok_or_else(|| EvalError::UnknownColumn(target.to_string()))?;
    spec.check_leakage(target)?;
    let splits = summarize(&split(table.len(), cfg)?);
    let job = |s: &SplitSummary| run_fold(table, target, spec, s, SplitMix64::derive_seed(cfg.seed, s.fold as u64));
    let folds: Vec<FoldResult> = if cfg.parallel {
        splits.par_iter().map(job).collect()
    } else {
        splits.iter().map(job).collect()
    };
    let (mean, sd) = aggregate(&folds);
    let model = ModelReport {
        model: spec.name().to_string(),
        spec: spec.clone(),
        failed: folds.iter().filter(|f| f.metrics.is_none()).count(),
        folds,
        mean,
        sd,
    };
    let models = vec![model];
    Ok(EvalReport {
        target: target.to_string(),
        n: table.len(),
        cv: cfg.clone(),
        splits,
        ranking: rank(&models),
        models,
    })
}

/// Merges reports computed on identical splits of identical data and ranks
/// all their models together.
pub fn compare(reports: &[EvalReport]) -> Result<EvalReport, EvalError> {
    let first = reports.first().ok_or(EvalError::EmptyInput)?;
    let mut models: Vec<ModelReport> = Vec::new();
    for r in reports {
        if r.target != first.target || r.n != first.n || r.splits != first.splits {
            return Err(EvalError::IncomparableReports(format!(
                "report for {} on {} rows differs from {} on {} rows or uses other splits",
                r.target, r.n, first.target, first.n
            )));
        }
        for m in &r.models {
            if models.iter().any(|x| x.model == m.model) {
                return Err(EvalError::IncomparableReports(format!("model {} appears twice", m.model)));
            }
            models.push(m.clone());
        }
    }
    Ok(EvalReport {
        target: first.target.clone(),
        n: first.n,
        cv: first.cv.clone(),
        splits: first.splits.clone(),
        ranking: rank(&models),
        models,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvalReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == name)
    }

    /// Models in ranking order.
    pub fn ranked(&self) -> impl Iterator<Item = &ModelReport> {
        self.ranking.iter().filter_map(|n| self.model(n))
    }

    /// `model,mae,mse,rmse,mae_sd,mse_sd,rmse_sd,folds,failed`, one row per
    /// model in ranking order, full precision.
    pub fn write_aggregate_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "mae", "mse", "rmse", "mae_sd", "mse_sd", "rmse_sd", "folds", "failed"])?;
        for m in self.ranked() {
            w.write_record([
                m.model.clone(),
                fmt_opt(m.mean.map(|x| x.mae)),
                fmt_opt(m.mean.map(|x| x.mse)),
                fmt_opt(m.mean.map(|x| x.rmse)),
                fmt_opt(m.sd.map(|x| x.mae)),
                fmt_opt(m.sd.map(|x| x.mse)),
                fmt_opt(m.sd.map(|x| x.rmse)),
                m.folds.len().to_string(),
                m.failed.to_string(),
            ])?;
        }
        w.flush()
    }

    /// One row per model and fold; failed folds carry the error message.
    pub fn write_folds_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "fold", "train_len", "test_start", "test_len", "mae", "mse", "rmse", "error"])?;
        for m in self.ranked() {
            for (f, s) in m.folds.iter().zip(&self.splits) {
                w.write_record([
                    m.model.clone(),
                    f.fold.to_string(),
                    s.train_len.to_string(),
                    s.test_start.to_string(),
                    s.test_len.to_string(),
                    fmt_opt(f.metrics.map(|x| x.mae)),
                    fmt_opt(f.metrics.map(|x| x.mse)),
                    fmt_opt(f.metrics.map(|x| x.rmse)),
                    f.error.clone().unwrap_or_default(),
                ])?;
            }
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::CvMode;
    use crate::features::{COST_VARIANCE, PLANNED_VALUE};

    fn table() -> FeatureTable {
        let mut t = FeatureTable::new(10);
        t.push(COST_VARIANCE, (0..10).map(|i| (i as f64 * 0.7).sin() * 3.0).collect()).unwrap();
        t.push(PLANNED_VALUE, (1..=10).map(|i| i as f64 * 10.0).collect()).unwrap();
        t
    }

    fn expanding() -> CvConfig {
        CvConfig {
            min_train: 4,
            horizon: 2,
            ..CvConfig::default()
        }
    }

    #[test]
    fn oracle_is_exact_in_every_fold() {
        for cfg in [expanding(), CvConfig { mode: CvMode::BlockedKfold, k: 5, ..CvConfig::default() }] {
            let r = cross_validate(&table(), COST_VARIANCE, &ModelSpec::Oracle, &cfg).unwrap();
            let m = &r.models[0];
            assert_eq!(m.failed, 0);
            for f in &m.folds {
                assert_eq!(f.metrics, Some(Metrics { mae: 0.0, mse: 0.0, rmse: 0.0 }));
            }
        }
    }

    #[test]
    fn constant_model_matches_closed_form() {
        let t = table();
        let y = t.column(COST_VARIANCE).unwrap().to_vec();
        let r = cross_validate(&t, COST_VARIANCE, &ModelSpec::Constant { value: 0.5 }, &expanding()).unwrap();
        for (f, s) in r.models[0].folds.iter().zip(&r.splits) {
            let block = &y[s.test_start..s.test_start + s.test_len];
            let mse = block.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>() / block.len() as f64;
            assert!((f.metrics.unwrap().mse - mse).abs() < 1e-15);
        }
        assert_eq!(r.splits.iter().map(|s| s.test_len).collect::<Vec<_>>(), vec![2, 2, 2]);
    }

    #[test]
    fn blocked_first_fold_recorded_as_failure() {
        let mut t = FeatureTable::new(40);
        t.push(COST_VARIANCE, (0..40).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
        let cfg = CvConfig {
            mode: CvMode::BlockedKfold,
            k: 2,
            ..CvConfig::default()
        };
        let spec = ModelSpec::Arima {
            order: Some(crate::arima::ArimaOrder::new(0, 1, 0)),
            caps: crate::arima::ArimaOrder::default_caps(),
            optimizer: Default::default(),
        };
        let r = cross_validate(&t, COST_VARIANCE, &spec, &cfg).unwrap();
        let m = &r.models[0];
        assert_eq!(m.failed, 1);
        assert!(m.folds[0].error.is_some() && m.folds[0].metrics.is_none());
        assert!(m.folds[1].metrics.is_some());
        assert_eq!(m.mean, m.folds[1].metrics);
    }

    #[test]
    fn repeated_runs_identical_and_parallel_agrees() {
        let spec = ModelSpec::Constant { value: 1.0 };
        let a = cross_validate(&table(), COST_VARIANCE, &spec, &expanding()).unwrap();
        let b = cross_validate(&table(), COST_VARIANCE, &spec, &expanding()).unwrap();
        let c = cross_validate(&table(), COST_VARIANCE, &spec, &CvConfig { parallel: true, ..expanding() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.models, c.models);
    }

    #[test]
    fn compare_ranks_and_breaks_ties_by_name() {
        let t = table();
        let run = |s: ModelSpec| cross_validate(&t, COST_VARIANCE, &s, &expanding()).unwrap();
        let single = compare(&[run(ModelSpec::Oracle)]).unwrap();
        assert_eq!(single.ranking, vec!["oracle"]);
        let merged = compare(&[run(ModelSpec::Constant { value: 9.0 }), run(ModelSpec::Oracle), run(ModelSpec::Evm)]).unwrap();
        assert_eq!(merged.ranking[0], "oracle");
        let rmse: Vec<f64> = merged.ranked().filter_map(|m| m.mean.map(|x| x.rmse)).collect();
        assert!(rmse.windows(2).all(|w| w[0] <= w[1]));

        let mut a = run(ModelSpec::Oracle);
        let mut b = a.clone();
        a.models[0].model = "zeta".into();
        b.models[0].model = "alpha".into();
        assert_eq!(compare(&[a, b]).unwrap().ranking, vec!["alpha", "zeta"]);
    }

    #[test]
    fn compare_rejects_mismatched_splits() {
        let t = table();
        let a = cross_validate(&t, COST_VARIANCE, &ModelSpec::Oracle, &expanding()).unwrap();
        let b = cross_validate(&t, COST_VARIANCE, &ModelSpec::Evm, &CvConfig { horizon: 3, ..expanding() }).unwrap();
        assert!(matches!(compare(&[a.clone(), b]), Err(EvalError::IncomparableReports(_))));
        assert!(matches!(compare(&[a.clone(), a]), Err(EvalError::IncomparableReports(_))));
    }

    #[test]
    fn csv_and_json_views() {
        let r = cross_validate(&table(), COST_VARIANCE, &ModelSpec::Oracle, &expanding()).unwrap();
        let mut buf = Vec::new();
        r.write_aggregate_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "model,mae,mse,rmse,mae_sd,mse_sd,rmse_sd,folds,failed\noracle,0,0,0,0,0,0,3,0\n");
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), r);
    }
}
