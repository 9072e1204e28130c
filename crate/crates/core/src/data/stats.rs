use serde::{Deserialize, Serialize};

use super::DataError;
use crate::features::FeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

/// Min-max scaling parameters of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub min: f64,
    pub max: f64,
}

impl NormParams {
    pub fn fit(column: &[f64]) -> Result<Self, DataError> {
        if column.is_empty() {
            return Err(DataError::EmptyInput);
        }
        if column.iter().any(|x| !x.is_finite()) {
            return Err(DataError::NonFiniteInput);
        }
        let min = column.iter().copied().fold(f64::INFINITY, f64::min);
        let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { min, max })
    }

    pub fn is_degenerate(&self) -> bool {
        self.max == self.min
    }

    /// Constant columns map to the centre of the unit interval.
    pub fn scale(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            0.5
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    pub fn unscale(&self, s: f64) -> f64 {
        if self.is_degenerate() {
            self.min
        } else {
            s * (self.max - self.min) + self.min
        }
    }
}

pub fn normalize_minmax(column: &[f64]) -> Result<(Vec<f64>, NormParams), DataError> {
    let params = NormParams::fit(column)?;
    Ok((column.iter().map(|&x| params.scale(x)).collect(), params))
}

pub fn denormalize(scaled: &[f64], params: &NormParams) -> Vec<f64> {
    scaled.iter().map(|&s| params.unscale(s)).collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Type-7 quantile of an ascending slice: `h = (n-1)p + 1` (1-based), linear
/// interpolation between the neighbouring order statistics.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

pub fn summary(column: &[f64]) -> Result<SummaryStats, DataError> {
    if column.is_empty() {
        return Err(DataError::EmptyInput);
    }
    if column.iter().any(|x| !x.is_finite()) {
        return Err(DataError::NonFiniteInput);
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SummaryStats {
        min: sorted[0],
        q1: quantile_type7(&sorted, 0.25),
        median: quantile_type7(&sorted, 0.5),
        // Clamped so rounding cannot push the mean outside [min, max].
        mean: mean(column).clamp(sorted[0], sorted[sorted.len() - 1]),
        q3: quantile_type7(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64, DataError> {
    if x.len() != y.len() {
        return Err(DataError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(DataError::EmptyInput);
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(DataError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pairwise Pearson correlations of the named columns. Symmetric with a
/// unit diagonal; each off-diagonal pair is computed once.
pub fn corr_matrix(table: &FeatureTable, columns: &[&str]) -> Result<Vec<Vec<f64>>, DataError> {
    let cols: Vec<&[f64]> = columns
        .iter()
        .map(|name| table.column(name).ok_or_else(|| DataError::UnknownColumn(name.to_string())))
        .collect::<Result<_, _>>()?;
    let k = cols.len();
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        m[i][i] = 1.0;
        for j in (i + 1)..k {
            let r = pearson_corr(cols[i], cols[j])?;
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minmax_examples() {
        let (s, p) = normalize_minmax(&[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(s, vec![0.0, 0.5, 1.0]);
        assert_eq!(p, NormParams { min: 2.0, max: 6.0 });
        let (s, p) = normalize_minmax(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(s, vec![0.5, 0.5, 0.5]);
        assert_eq!(p, NormParams { min: 5.0, max: 5.0 });
        assert!(matches!(normalize_minmax(&[1.0, f64::NAN]), Err(DataError::NonFiniteInput)));
    }

    #[test]
    fn denormalize_examples() {
        let p = NormParams { min: 2.0, max: 6.0 };
        assert_eq!(denormalize(&[0.0, 0.5, 1.0], &p), vec![2.0, 4.0, 6.0]);
        assert!(denormalize(&[], &p).is_empty());
        assert_eq!(denormalize(&[0.25], &NormParams { min: 0.0, max: 8.0 }), vec![2.0]);
        assert_eq!(denormalize(&[0.3, 0.9], &NormParams { min: 5.0, max: 5.0 }), vec![5.0, 5.0]);
    }

    #[test]
    fn summary_examples() {
        let s = summary(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3, s.mean), (2.0, 3.0, 4.0, 3.0));
        let s = summary(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.q1, s.q3), (1.75, 3.25));
        assert!(matches!(summary(&[]), Err(DataError::EmptyInput)));
    }

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson_corr(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0);
        let r = pearson_corr(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-15, "{r}");
        assert!(matches!(pearson_corr(&[1.0, 2.0], &[1.0]), Err(DataError::LengthMismatch(2, 1))));
        assert!(matches!(pearson_corr(&[1.0, 1.0], &[2.0, 2.0]), Err(DataError::ZeroVariance)));
    }

    #[test]
    fn corr_matrix_examples() {
        let mut t = FeatureTable::new(3);
        t.push("a", vec![1.0, 5.0, 2.0]).unwrap();
        t.push("b", vec![1.0, 5.0, 2.0]).unwrap();
        t.push("c", vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(corr_matrix(&t, &["a"]).unwrap(), vec![vec![1.0]]);
        let m = corr_matrix(&t, &["a", "b"]).unwrap();
        assert!(m.iter().flatten().all(|&v| (v - 1.0).abs() < 1e-15));
        let m = corr_matrix(&t, &["a", "b", "c"]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
        assert_eq!(m[0][2], pearson_corr(t.column("a").unwrap(), t.column("c").unwrap()).unwrap());
        assert!(matches!(corr_matrix(&t, &["zz"]), Err(DataError::UnknownColumn(_))));
    }

    proptest! {
        #[test]
        fn minmax_in_unit_interval_and_invertible(xs in prop::collection::vec(-1e6f64..1e6, 1..50)) {
            let (s, p) = normalize_minmax(&xs).unwrap();
            prop_assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
            if !p.is_degenerate() {
                let back = denormalize(&s, &p);
                for (a, b) in xs.iter().zip(&back) {
                    let scale = a.abs().max(p.max - p.min);
                    prop_assert!((a - b).abs() <= 1e-12 * scale, "{} vs {}", a, b);
                }
            }
        }

        #[test]
        fn summary_ordering_chain(xs in prop::collection::vec(-1e6f64..1e6, 1..60)) {
            let s = summary(&xs).unwrap();
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
            prop_assert!(s.min <= s.mean && s.mean <= s.max);
        }

        #[test]
        fn correlation_bounded(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..40)) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(r) = pearson_corr(&x, &y) {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
