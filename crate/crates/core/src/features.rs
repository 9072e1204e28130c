//! Model inputs: rolling averages, seeded simulation of exogenous factors, and
//! the assembled [`FeatureTable`].
//!
//! Exogenous draws come from one SplitMix64 stream seeded with
//! [`ExogConfig::seed`]. For a series of length `n` the stream positions are:
//!
//! | positions            | use                                   |
//! |----------------------|---------------------------------------|
//! | `0 .. n`             | weather pattern, period 0..n          |
//! | `n .. 2n`            | resource availability, period 0..n    |
//! | `2n .. 2n+h`         | weather pattern, future periods 0..h  |
//! | `2n+h .. 2n+2h`      | resource availability, future periods |
//!
//! Weather is `1 + floor(10u)` (clamped to 10), resource availability is
//! `80 + 20u` percent, with `u = (z >> 11) * 2^-53`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{DataError, Field, Period, ProjectSeries};
use crate::rng::SplitMix64;

pub const ESTIMATE_COST: &str = "estimate_cost";
pub const ACTUAL_COST: &str = "actual_cost";
pub const COST_VARIANCE: &str = "cost_variance";
pub const PLANNED_VALUE: &str = "planned_value";
pub const EARNED_VALUE: &str = "earned_value";
pub const WEATHER_PATTERN: &str = "weather_pattern";
pub const RESOURCE_AVAILABILITY: &str = "resource_availability";
pub const ROLLING_AVG_COST_VARIANCE: &str = "rolling_avg_cost_variance";
pub const ROLLING_AVG_PLANNED_VALUE: &str = "rolling_avg_planned_value";
pub const ROLLING_AVG_EARNED_VALUE: &str = "rolling_avg_earned_value";
pub const ROLLING_AVG_ACTUAL_COST: &str = "rolling_avg_actual_cost";

/// Column order of a table built by [`build_feature_table`].
pub const FEATURE_COLUMNS: [&str; 11] = [
    ESTIMATE_COST,
    ACTUAL_COST,
    COST_VARIANCE,
    PLANNED_VALUE,
    EARNED_VALUE,
    WEATHER_PATTERN,
    RESOURCE_AVAILABILITY,
    ROLLING_AVG_COST_VARIANCE,
    ROLLING_AVG_PLANNED_VALUE,
    ROLLING_AVG_EARNED_VALUE,
    ROLLING_AVG_ACTUAL_COST,
];

/// Columns whose future values are known when a forecast is made: the plan
/// and the exogenous factors.
pub const KNOWN_IN_ADVANCE: [&str; 5] = [
    ESTIMATE_COST,
    PLANNED_VALUE,
    ROLLING_AVG_PLANNED_VALUE,
    WEATHER_PATTERN,
    RESOURCE_AVAILABILITY,
];

pub fn is_known_in_advance(column: &str) -> bool {
    KNOWN_IN_ADVANCE.contains(&column)
}

/// The rolling-average column computed from `source`, if any.
pub fn rolling_column_of(source: &str) -> Option<&'static str> {
    match source {
        COST_VARIANCE => Some(ROLLING_AVG_COST_VARIANCE),
        PLANNED_VALUE => Some(ROLLING_AVG_PLANNED_VALUE),
        EARNED_VALUE => Some(ROLLING_AVG_EARNED_VALUE),
        _ => None,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("window must be at least 1, got {0}")]
    InvalidWindow(usize),
    #[error("empty column")]
    EmptyColumn,
    #[error("series holds {0} WBS labels; filter or aggregate first")]
    MultipleWbs(usize),
    #[error("column {name} has length {got}, table has {expected}")]
    LengthMismatch { name: String, got: usize, expected: usize },
    #[error("duplicate column {0}")]
    DuplicateColumn(String),
    #[error("invalid exogenous range: {0}")]
    InvalidRange(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Named numeric columns over a common list of periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    periods: Vec<Period>,
    columns: Vec<(String, Vec<f64>)>,
}

impl FeatureTable {
    /// An empty table over `len` consecutive months starting 2000-01.
    pub fn new(len: usize) -> Self {
        let start = Period::new(2000, 1).expect("valid month");
        Self::from_periods((0..len as i64).map(|i| start.add_months(i)).collect())
    }

    pub fn from_periods(periods: Vec<Period>) -> Self {
        Self {
            periods,
            columns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn push(&mut self, name: &str, values: Vec<f64>) -> Result<(), FeatureError> {
        if values.len() != self.len() {
            return Err(FeatureError::LengthMismatch {
                name: name.to_string(),
                got: values.len(),
                expected: self.len(),
            });
        }
        if self.column(name).is_some() {
            return Err(FeatureError::DuplicateColumn(name.to_string()));
        }
        self.columns.push((name.to_string(), values));
        Ok(())
    }

    /// Rows `range`, all columns.
    pub fn rows(&self, range: std::ops::Range<usize>) -> FeatureTable {
        FeatureTable {
            periods: self.periods[range.clone()].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|(n, v)| (n.clone(), v[range.clone()].to_vec()))
                .collect(),
        }
    }

    /// Writes `period,<columns...>` with full-precision values.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "period")?;
        for (name, _) in &self.columns {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for (i, p) in self.periods.iter().enumerate() {
            write!(out, "{p}")?;
            for (_, v) in &self.columns {
                write!(out, ",{}", v[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExogConfig {
    pub seed: u64,
    /// Inclusive integer bounds of the weather index.
    pub weather_range: (u32, u32),
    /// Percent bounds `[lo, hi)` of resource availability.
    pub resource_range: (f64, f64),
}

impl Default for ExogConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            weather_range: (1, 10),
            resource_range: (80.0, 100.0),
        }
    }
}

impl ExogConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let (wlo, whi) = self.weather_range;
        let (rlo, rhi) = self.resource_range;
        if wlo > whi {
            return Err(FeatureError::InvalidRange(format!("weather {wlo}..={whi}")));
        }
        if !(rlo.is_finite() && rhi.is_finite() && rlo < rhi) {
            return Err(FeatureError::InvalidRange(format!("resource {rlo}..{rhi}")));
        }
        Ok(())
    }

    fn weather_draw(&self, rng: &mut SplitMix64) -> f64 {
        let (lo, hi) = self.weather_range;
        let levels = (hi - lo + 1) as f64;
        let k = (rng.next_f64() * levels).floor().min(levels - 1.0);
        lo as f64 + k
    }

    fn resource_draw(&self, rng: &mut SplitMix64) -> f64 {
        let (lo, hi) = self.resource_range;
        lo + (hi - lo) * rng.next_f64()
    }
}

/// Trailing mean over `window` periods; the first `window - 1` outputs average
/// the points available so far.
pub fn rolling_average(column: &[f64], window: usize) -> Result<Vec<f64>, FeatureError> {
    if window < 1 {
        return Err(FeatureError::InvalidWindow(window));
    }
    if column.is_empty() {
        return Err(FeatureError::EmptyColumn);
    }
    Ok((0..column.len())
        .map(|t| trailing_mean(column, t, window))
        .collect())
}

/// Mean of `column[max(0, t+1-window) ..= t]`.
pub fn trailing_mean(column: &[f64], t: usize, window: usize) -> f64 {
    let start = (t + 1).saturating_sub(window);
    let slice = &column[start..=t];
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// Stream positions `0..n`.
pub fn simulate_weather(n: usize, cfg: &ExogConfig) -> Vec<f64> {
    let mut rng = SplitMix64::new(cfg.seed);
    (0..n).map(|_| cfg.weather_draw(&mut rng)).collect()
}

/// Stream positions `n..2n`, i.e. after the weather draws of the same length.
pub fn simulate_resource_availability(n: usize, cfg: &ExogConfig) -> Vec<f64> {
    let mut rng = SplitMix64::new(cfg.seed);
    rng.skip(n);
    (0..n).map(|_| cfg.resource_draw(&mut rng)).collect()
}

/// Both factors for `n` historical periods, `(weather, resource)`.
pub fn simulate_exog(n: usize, cfg: &ExogConfig) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix64::new(cfg.seed);
    let weather = (0..n).map(|_| cfg.weather_draw(&mut rng)).collect();
    let resource = (0..n).map(|_| cfg.resource_draw(&mut rng)).collect();
    (weather, resource)
}

/// Both factors for `horizon` periods following `n` historical ones.
pub fn simulate_exog_future(n: usize, horizon: usize, cfg: &ExogConfig) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix64::new(cfg.seed);
    rng.skip(2 * n);
    let weather = (0..horizon).map(|_| cfg.weather_draw(&mut rng)).collect();
    let resource = (0..horizon).map(|_| cfg.resource_draw(&mut rng)).collect();
    (weather, resource)
}

/// Assembles the eleven model columns from a cleaned single-WBS series.
/// Cost variance is `EV - AC` on cumulative values; exogenous columns are
/// taken from the source when supplied and simulated otherwise.
pub fn build_feature_table(series: &ProjectSeries, exog: &ExogConfig, window: usize) -> Result<FeatureTable, FeatureError> {
    if window < 1 {
        return Err(FeatureError::InvalidWindow(window));
    }
    exog.validate()?;
    let labels = series.wbs_labels();
    if labels.len() > 1 {
        return Err(FeatureError::MultipleWbs(labels.len()));
    }
    if series.is_empty() {
        return Err(FeatureError::EmptyColumn);
    }
    let n = series.len();
    let estimate = series.values(Field::EstimateCost)?;
    let actual = series.values(Field::ActualCost)?;
    let pv = series.values(Field::PlannedValue)?;
    let ev = series.values(Field::EarnedValue)?;
    let ac_cum = series.values(Field::ActualCostCum)?;
    let cv: Vec<f64> = ev.iter().zip(&ac_cum).map(|(e, a)| e - a).collect();

    let (sim_weather, sim_resource) = simulate_exog(n, exog);
    let weather = if series.supplied.contains(&Field::WeatherPattern) {
        series.values(Field::WeatherPattern)?
    } else {
        sim_weather
    };
    let resource = if series.supplied.contains(&Field::ResourceAvailability) {
        series.values(Field::ResourceAvailability)?
    } else {
        sim_resource
    };

    let rolling = [
        (ROLLING_AVG_COST_VARIANCE, rolling_average(&cv, window)?),
        (ROLLING_AVG_PLANNED_VALUE, rolling_average(&pv, window)?),
        (ROLLING_AVG_EARNED_VALUE, rolling_average(&ev, window)?),
        (ROLLING_AVG_ACTUAL_COST, rolling_average(&ac_cum, window)?),
    ];
    let mut table = FeatureTable::from_periods(series.periods());
    table.push(ESTIMATE_COST, estimate)?;
    table.push(ACTUAL_COST, actual)?;
    table.push(COST_VARIANCE, cv)?;
    table.push(PLANNED_VALUE, pv)?;
    table.push(EARNED_VALUE, ev)?;
    table.push(WEATHER_PATTERN, weather)?;
    table.push(RESOURCE_AVAILABILITY, resource)?;
    for (name, values) in rolling {
        table.push(name, values)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ingest_reader, ColumnMap};
    use proptest::prelude::*;

    #[test]
    fn rolling_examples() {
        assert_eq!(rolling_average(&[2.0, 4.0, 6.0, 8.0], 3).unwrap(), vec![2.0, 3.0, 4.0, 6.0]);
        let xs = [3.5, -1.0, 7.25];
        assert_eq!(rolling_average(&xs, 1).unwrap(), xs.to_vec());
        assert_eq!(rolling_average(&[4.0; 5], 3).unwrap(), vec![4.0; 5]);
        assert!(matches!(rolling_average(&xs, 0), Err(FeatureError::InvalidWindow(0))));
        assert!(matches!(rolling_average(&[], 2), Err(FeatureError::EmptyColumn)));
    }

    // Frozen from an independent Python SplitMix64 implementation:
    // seed 42 outputs 0xbdd732262feb6e95, 0x28efe333b266f103, ...
    #[test]
    fn weather_seed_42_matches_reference_stream() {
        let mut rng = SplitMix64::new(42);
        assert_eq!(rng.next_u64(), 0xbdd7_3226_2feb_6e95);
        assert_eq!(rng.next_u64(), 0x28ef_e333_b266_f103);
        assert_eq!(SplitMix64::new(0).next_u64(), 0xe220_a839_7b1d_cdaf);
        assert_eq!(simulate_weather(5, &ExogConfig::with_seed(42)), vec![8.0, 2.0, 3.0, 4.0, 1.0]);
    }

    #[test]
    fn resource_follows_weather_positions() {
        let cfg = ExogConfig::with_seed(42);
        let expected = [97.36456153093064, 84.36810387424369, 96.01263753427007, 86.7986207783404, 92.3696413271227];
        assert_eq!(simulate_resource_availability(5, &cfg), expected.to_vec());
        let (w, r) = simulate_exog(5, &cfg);
        assert_eq!(w, simulate_weather(5, &cfg));
        assert_eq!(r, expected.to_vec());
    }

    #[test]
    fn empty_simulations() {
        let cfg = ExogConfig::default();
        assert!(simulate_weather(0, &cfg).is_empty());
        assert!(simulate_resource_availability(0, &cfg).is_empty());
    }

    #[test]
    fn simulated_ranges() {
        for seed in [0, 1, 42, u64::MAX] {
            let cfg = ExogConfig::with_seed(seed);
            let w = simulate_weather(1000, &cfg);
            assert!(w.iter().all(|&v| (1.0..=10.0).contains(&v) && v.fract() == 0.0));
            let r = simulate_resource_availability(1000, &cfg);
            assert!(r.iter().all(|&v| (80.0..100.0).contains(&v)));
            assert_eq!(r, simulate_resource_availability(1000, &cfg));
        }
    }

    #[test]
    fn future_exog_continues_stream() {
        let cfg = ExogConfig::with_seed(9);
        let mut rng = SplitMix64::new(9);
        rng.skip(2 * 7);
        let first = 1.0 + (rng.next_f64() * 10.0).floor().min(9.0);
        let (w, r) = simulate_exog_future(7, 3, &cfg);
        assert_eq!(w[0], first);
        assert_eq!((w.len(), r.len()), (3, 3));
    }

    fn fixture(extra_header: &str, extra: [&str; 3]) -> ProjectSeries {
        let text = format!(
            "period,wbs,estimate_cost,actual_cost,planned_value,earned_value{extra_header}\n\
             2011-01,A,10,9,100,90{}\n2011-02,A,12,11,200,180{}\n2011-03,A,8,10,300,270{}\n",
            extra[0], extra[1], extra[2]
        );
        ingest_reader(text.as_bytes(), &ColumnMap::default()).unwrap()
    }

    #[test]
    fn table_shape_and_cost_variance() {
        let t = build_feature_table(&fixture("", ["", "", ""]), &ExogConfig::with_seed(1), 3).unwrap();
        assert_eq!(t.names(), FEATURE_COLUMNS.to_vec());
        assert!(FEATURE_COLUMNS.iter().all(|c| t.column(c).unwrap().len() == 3));
        assert_eq!(t.column(COST_VARIANCE).unwrap(), &[81.0, 160.0, 240.0]);
        assert_eq!(t.column(ROLLING_AVG_ACTUAL_COST).unwrap(), &[9.0, 14.5, 59.0 / 3.0]);
    }

    #[test]
    fn unit_window_copies_sources() {
        let t = build_feature_table(&fixture("", ["", "", ""]), &ExogConfig::default(), 1).unwrap();
        assert_eq!(t.column(ROLLING_AVG_PLANNED_VALUE), t.column(PLANNED_VALUE));
        assert_eq!(t.column(ROLLING_AVG_EARNED_VALUE), t.column(EARNED_VALUE));
        assert_eq!(t.column(ROLLING_AVG_COST_VARIANCE), t.column(COST_VARIANCE));
    }

    #[test]
    fn supplied_weather_bypasses_simulation() {
        let s = fixture(",weather_pattern", [",3", ",7", ",5"]);
        let cfg = ExogConfig::with_seed(42);
        let t = build_feature_table(&s, &cfg, 3).unwrap();
        assert_eq!(t.column(WEATHER_PATTERN).unwrap(), &[3.0, 7.0, 5.0]);
        assert_eq!(t.column(RESOURCE_AVAILABILITY).unwrap(), simulate_resource_availability(3, &cfg).as_slice());
    }

    #[test]
    fn table_rejects_bad_columns() {
        let mut t = FeatureTable::new(2);
        t.push("a", vec![1.0, 2.0]).unwrap();
        assert!(matches!(t.push("a", vec![1.0, 2.0]), Err(FeatureError::DuplicateColumn(_))));
        assert!(matches!(t.push("b", vec![1.0]), Err(FeatureError::LengthMismatch { .. })));
    }

    proptest! {
        #[test]
        fn rolling_bounded_by_source(xs in prop::collection::vec(-1e6f64..1e6, 1..40), w in 1usize..10) {
            let r = rolling_average(&xs, w).unwrap();
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let slack = 1e-9 * hi.abs().max(lo.abs()).max(1.0);
            prop_assert_eq!(r.len(), xs.len());
            prop_assert!(r.iter().all(|v| *v >= lo - slack && *v <= hi + slack));
        }

        #[test]
        fn wide_window_is_running_mean(xs in prop::collection::vec(-1e3f64..1e3, 1..30)) {
            let r = rolling_average(&xs, xs.len() + 3).unwrap();
            for t in 0..xs.len() {
                let m = xs[..=t].iter().sum::<f64>() / (t + 1) as f64;
                prop_assert!((r[t] - m).abs() < 1e-9);
            }
        }

        #[test]
        fn simulation_reproducible(n in 0usize..200, seed in any::<u64>()) {
            let cfg = ExogConfig::with_seed(seed);
            let (w1, r1) = simulate_exog(n, &cfg);
            let (w2, r2) = simulate_exog(n, &cfg);
            prop_assert_eq!(&w1, &w2);
            prop_assert_eq!(&r1, &r2);
            prop_assert!(w1.iter().all(|v| (1.0..=10.0).contains(v)));
            prop_assert!(r1.iter().all(|v| (80.0..100.0).contains(v)));
        }
    }
}
