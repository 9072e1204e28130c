//! Exact Shapley-value attribution.
//!
//! A feature outside the coalition takes its background value, normally the
//! training-set mean (interventional replacement with a single reference
//! point). Attributions therefore depend on the background chosen.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::FeatureTable;
use crate::lstm::LstmModel;

/// Largest feature count accepted; coalition values grow as `2^F`.
pub const MAX_FEATURES: usize = 14;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExplainError {
    #[error("{count} features exceed the exact-enumeration limit of {max}; reduce the feature set")]
    TooManyFeatures { count: usize, max: usize },
    #[error("expected {expected} feature values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no instances to explain")]
    EmptyInstances,
    #[error("predictor returned a non-finite value")]
    NonFinitePrediction,
    #[error("table is too short for the model window ({got} rows, need {need})")]
    TooShort { need: usize, got: usize },
    #[error("unknown column {0}")]
    UnknownColumn(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub features: Vec<String>,
    /// Shapley value per feature, in target units.
    pub values: Vec<f64>,
    /// Prediction with every feature at the background.
    pub base: f64,
    /// Prediction on the instance.
    pub full: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub features: Vec<String>,
    /// Mean absolute Shapley value per feature, in `features` order.
    pub mean_abs: Vec<f64>,
    /// Feature names by descending mean absolute value, ties by name.
    pub ranking: Vec<String>,
    pub attributions: Vec<Attribution>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Shapley values of `predictor` at `instance` relative to `background`.
///
/// Every coalition value is computed once. Each marginal difference is
/// weighted by the integer count `|S|! (F - |S| - 1)!` and the sum is divided
/// by `F!` at the end.
pub fn shapley_exact<P>(predictor: P, names: &[String], instance: &[f64], background: &[f64]) -> Result<Attribution, ExplainError>
where
    P: Fn(&[f64]) -> f64,
{
    let f = names.len();
    if f > MAX_FEATURES {
        return Err(ExplainError::TooManyFeatures {
            count: f,
            max: MAX_FEATURES,
        });
    }
    for v in [instance, background] {
        if v.len() != f {
            return Err(ExplainError::LengthMismatch { expected: f, got: v.len() });
        }
    }
    let mut mixed = background.to_vec();
    let values: Vec<f64> = (0..1usize << f)
        .map(|mask| {
            for i in 0..f {
                mixed[i] = if mask >> i & 1 == 1 { instance[i] } else { background[i] };
            }
            predictor(&mixed)
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ExplainError::NonFinitePrediction);
    }
    let weights: Vec<f64> = (0..f).map(|s| factorial(s) * factorial(f - s - 1)).collect();
    let total = factorial(f);
    let phi = (0..f)
        .map(|i| {
            let bit = 1usize << i;
            let mut acc = 0.0;
            for mask in (0..1usize << f).filter(|m| m & bit == 0) {
                acc += weights[mask.count_ones() as usize] * (values[mask | bit] - values[mask]);
            }
            acc / total
        })
        .collect();
    Ok(Attribution {
        features: names.to_vec(),
        values: phi,
        base: values[0],
        full: values[(1 << f) - 1],
    })
}

/// Mean absolute attribution per feature over `attributions`, which must
/// share the feature list `names`.
pub fn summarize(names: &[String], attributions: Vec<Attribution>) -> Result<ShapSummary, ExplainError> {
    if attributions.is_empty() {
        return Err(ExplainError::EmptyInstances);
    }
    let n = attributions.len() as f64;
    let mean_abs: Vec<f64> = (0..names.len())
        .map(|i| attributions.iter().map(|a| a.values[i].abs()).sum::<f64>() / n)
        .collect();
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]).then_with(|| names[a].cmp(&names[b])));
    Ok(ShapSummary {
        features: names.to_vec(),
        ranking: order.into_iter().map(|i| names[i].clone()).collect(),
        mean_abs,
        attributions,
    })
}

/// Attributions for every instance and their mean-absolute summary.
/// Instances are explained in parallel; results keep input order.
pub fn shap_summary<P>(predictor: P, names: &[String], instances: &[Vec<f64>], background: &[f64]) -> Result<ShapSummary, ExplainError>
where
    P: Fn(&[f64]) -> f64 + Sync,
{
    if instances.is_empty() {
        return Err(ExplainError::EmptyInstances);
    }
    let attributions = instances
        .par_iter()
        .map(|x| shapley_exact(&predictor, names, x, background))
        .collect::<Result<Vec<_>, _>>()?;
    summarize(names, attributions)
}

/// Per-column means, the usual background.
pub fn column_means(instances: &[Vec<f64>]) -> Result<Vec<f64>, ExplainError> {
    let first = instances.first().ok_or(ExplainError::EmptyInstances)?;
    let mut sums = vec![0.0; first.len()];
    for x in instances {
        if x.len() != sums.len() {
            return Err(ExplainError::LengthMismatch {
                expected: sums.len(),
                got: x.len(),
            });
        }
        sums.iter_mut().zip(x).for_each(|(s, v)| *s += v);
    }
    let n = instances.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Attributes LSTM predictions to the feature values of the most recent
/// window row; earlier rows keep their actual values. One instance per full
/// window in `table`, or the last `last` of them; the background is the
/// per-feature mean over `table`.
pub fn explain_lstm(model: &LstmModel, table: &FeatureTable, last: Option<usize>) -> Result<ShapSummary, ExplainError> {
    let names = model.spec.features.clone();
    let cols: Vec<&[f64]> = names
        .iter()
        .map(|n| table.column(n).ok_or_else(|| ExplainError::UnknownColumn(n.clone())))
        .collect::<Result<_, _>>()?;
    let w = model.spec.window;
    if table.len() < w {
        return Err(ExplainError::TooShort { need: w, got: table.len() });
    }
    let row = |t: usize| -> Vec<f64> { cols.iter().map(|c| c[t]).collect() };
    let background = column_means(&(0..table.len()).map(row).collect::<Vec<_>>())?;
    let ends = w - 1..table.len();
    let keep = last.unwrap_or(ends.len()).min(ends.len());
    let attributions = (ends.end - keep..ends.end)
        .into_par_iter()
        .map(|end| {
            let mut window: Vec<Vec<f64>> = (end + 1 - w..=end).map(row).collect();
            let instance = window.pop().expect("window is non-empty");
            let predictor = |last: &[f64]| {
                let mut full = window.clone();
                full.push(last.to_vec());
                model.predict_window(&full).unwrap_or(f64::NAN)
            };
            shapley_exact(predictor, &names, &instance, &background)
        })
        .collect::<Result<Vec<_>, _>>()?;
    summarize(&names, attributions)
}

impl ShapSummary {
    /// `feature,mean_abs_shap` rows in ranking order, full precision.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "mean_abs_shap"])?;
        for name in &self.ranking {
            let i = self.features.iter().position(|f| f == name).expect("ranked feature");
            w.write_record([name.clone(), self.mean_abs[i].to_string()])?;
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn names(f: usize) -> Vec<String> {
        (0..f).map(|i| format!("x{i}")).collect()
    }

    /// Average marginal contribution over all orderings.
    fn permutation_oracle(p: &dyn Fn(&[f64]) -> f64, x: &[f64], bg: &[f64]) -> Vec<f64> {
        fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items];
            }
            let mut out = Vec::new();
            for k in 0..items.len() {
                let mut rest = items.clone();
                let head = rest.remove(k);
                for mut tail in perms(rest) {
                    tail.insert(0, head);
                    out.push(tail);
                }
            }
            out
        }
        let f = x.len();
        let all = perms((0..f).collect());
        let mut phi = vec![0.0; f];
        for order in &all {
            let mut z = bg.to_vec();
            let mut prev = p(&z);
            for &i in order {
                z[i] = x[i];
                let cur = p(&z);
                phi[i] += cur - prev;
                prev = cur;
            }
        }
        phi.iter().map(|v| v / all.len() as f64).collect()
    }

    #[test]
    fn linear_example() {
        let a = shapley_exact(|x| 2.0 * x[0] + 3.0 * x[1], &names(2), &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(a.values, vec![2.0, 3.0]);
        assert_eq!((a.base, a.full), (0.0, 5.0));
    }

    #[test]
    fn dummy_and_symmetry() {
        let p = |x: &[f64]| x[0] * x[1] + (x[0] + x[1]).powi(2);
        let a = shapley_exact(p, &names(3), &[2.0, 2.0, 7.0], &[0.5, 0.5, -1.0]).unwrap();
        assert_eq!(a.values[2], 0.0);
        assert_eq!(a.values[0], a.values[1]);
    }

    #[test]
    fn limits_and_shapes() {
        let big = names(15);
        let err = shapley_exact(|_| 0.0, &big, &[0.0; 15], &[0.0; 15]).unwrap_err();
        assert_eq!(err, ExplainError::TooManyFeatures { count: 15, max: 14 });
        assert!(matches!(shapley_exact(|_| 0.0, &names(2), &[0.0], &[0.0, 0.0]), Err(ExplainError::LengthMismatch { .. })));
        assert_eq!(shapley_exact(|_| f64::NAN, &names(1), &[1.0], &[0.0]).unwrap_err(), ExplainError::NonFinitePrediction);
        let empty = shapley_exact(|_| 4.0, &[], &[], &[]).unwrap();
        assert!(empty.values.is_empty() && empty.base == 4.0);
    }

    #[test]
    fn fourteen_features_efficiency() {
        let n = names(14);
        let x: Vec<f64> = (0..14).map(|i| i as f64 * 0.3).collect();
        let p = |v: &[f64]| v.iter().enumerate().map(|(i, a)| (a * (i + 1) as f64).sin()).sum::<f64>() + v[0] * v[13];
        let a = shapley_exact(p, &n, &x, &[0.1; 14]).unwrap();
        assert!((a.values.iter().sum::<f64>() - (a.full - a.base)).abs() < 1e-9);
    }

    #[test]
    fn coalition_form_equals_permutation_form_exactly() {
        // Integer-valued predictors and inputs keep every sum exact.
        let mut rng = SplitMix64::new(31);
        for f in 1..=5 {
            for _ in 0..10 {
                let coef: Vec<f64> = (0..f * f).map(|_| (rng.next_u64() % 7) as f64 - 3.0).collect();
                let p = move |x: &[f64]| {
                    let mut s = 0.0;
                    for i in 0..x.len() {
                        for j in 0..x.len() {
                            s += coef[i * x.len() + j] * x[i] * if i == j { 1.0 } else { x[j] };
                        }
                    }
                    s
                };
                let x: Vec<f64> = (0..f).map(|_| (rng.next_u64() % 9) as f64 - 4.0).collect();
                let bg: Vec<f64> = (0..f).map(|_| (rng.next_u64() % 5) as f64).collect();
                let a = shapley_exact(&p, &names(f), &x, &bg).unwrap();
                let oracle = permutation_oracle(&p, &x, &bg);
                assert_eq!(a.values, oracle, "f = {f}");
            }
        }
    }

    #[test]
    fn linearity() {
        let f = |x: &[f64]| 1.5 * x[0] - 2.0 * x[2];
        let g = |x: &[f64]| 0.5 * x[1] + 4.0 * x[2];
        let (x, bg) = ([1.0, 2.0, 3.0], [0.25, 0.5, 0.75]);
        let a = shapley_exact(f, &names(3), &x, &bg).unwrap();
        let b = shapley_exact(g, &names(3), &x, &bg).unwrap();
        let ab = shapley_exact(|v: &[f64]| f(v) + g(v), &names(3), &x, &bg).unwrap();
        for i in 0..3 {
            assert!((ab.values[i] - a.values[i] - b.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn summary_rankings() {
        let n = names(3);
        let only_a = shap_summary(|x| x[1] * 3.0, &n, &[vec![1.0, 2.0, 3.0]], &[0.0; 3]).unwrap();
        assert_eq!(only_a.ranking, vec!["x1", "x0", "x2"]);
        assert_eq!((only_a.mean_abs[0], only_a.mean_abs[2]), (0.0, 0.0));

        let mut rng = SplitMix64::new(5);
        let xs: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.next_gaussian(), rng.next_gaussian()]).collect();
        let bg = column_means(&xs).unwrap();
        let s = shap_summary(|x| 5.0 * x[0] + x[1], &names(2), &xs, &bg).unwrap();
        assert_eq!(s.ranking, vec!["x0", "x1"]);

        let tie = shap_summary(|x| x[0] + x[1], &["b".to_string(), "a".to_string()], &[vec![1.0, 1.0]], &[0.0, 0.0]).unwrap();
        assert_eq!(tie.ranking, vec!["a", "b"]);
        assert_eq!(shap_summary(|_| 0.0, &n, &[], &[0.0; 3]).unwrap_err(), ExplainError::EmptyInstances);

        let mut buf = Vec::new();
        tie.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "feature,mean_abs_shap\na,1\nb,1\n");
    }

    proptest! {
        #[test]
        fn efficiency_holds(seed in any::<u64>(), f in 1usize..8) {
            let mut rng = SplitMix64::new(seed);
            let w: Vec<f64> = (0..f * 2).map(|_| rng.next_gaussian()).collect();
            let p = |x: &[f64]| x.iter().enumerate().map(|(i, v)| w[i] * v + w[f + i] * (v * x[0]).tanh()).sum::<f64>();
            let x: Vec<f64> = (0..f).map(|_| rng.next_gaussian() * 3.0).collect();
            let bg: Vec<f64> = (0..f).map(|_| rng.next_gaussian()).collect();
            let a = shapley_exact(p, &names(f), &x, &bg).unwrap();
            prop_assert!((a.values.iter().sum::<f64>() - (a.full - a.base)).abs() < 1e-9);
        }
    }
}
