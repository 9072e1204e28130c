//! Period-level project data: CSV ingestion, cleaning, normalization and
//! descriptive statistics.
//!
//! Planned value, earned value and cumulative actual cost are cumulative to
//! date; estimate cost and actual cost are per period.

mod clean;
mod ingest;
mod period;
mod stats;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use clean::{clean, fill_missing, iqr_fences, CleanAction, CleanEntry, CleanLog, CleanPolicy, MissingPolicy, OutlierPolicy};
pub use ingest::{ingest_csv, ingest_reader, write_csv, ColumnMap};
pub use period::{Period, PeriodParseError};
pub use stats::{
    corr_matrix, denormalize, mean, normalize_minmax, pearson_corr, quantile_type7, summary, NormParams,
    SummaryStats,
};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("missing column(s): {}", .0.join(", "))]
    MissingColumn(Vec<String>),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("duplicate period {period} for WBS {wbs:?}")]
    DuplicatePeriod { period: Period, wbs: String },
    #[error("column {0} has no observed values")]
    AllMissingColumn(String),
    #[error("missing value at {period}, column {column}")]
    MissingValue { period: Period, column: String },
    #[error("gap before {period} for WBS {wbs:?}")]
    Gap { period: Period, wbs: String },
    #[error("invariant violated at {period}, column {column}: {message}")]
    FailedInvariant {
        period: Period,
        column: String,
        message: String,
    },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("unknown WBS label {0:?}")]
    UnknownWbs(String),
}

/// Numeric columns of a [`PeriodRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    EstimateCost,
    ActualCost,
    PlannedValue,
    EarnedValue,
    ActualCostCum,
    CostVariance,
    WeatherPattern,
    ResourceAvailability,
}

impl Field {
    pub const ALL: [Field; 8] = [
        Field::EstimateCost,
        Field::ActualCost,
        Field::PlannedValue,
        Field::EarnedValue,
        Field::ActualCostCum,
        Field::CostVariance,
        Field::WeatherPattern,
        Field::ResourceAvailability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::EstimateCost => "estimate_cost",
            Field::ActualCost => "actual_cost",
            Field::PlannedValue => "planned_value",
            Field::EarnedValue => "earned_value",
            Field::ActualCostCum => "actual_cost_cum",
            Field::CostVariance => "cost_variance",
            Field::WeatherPattern => "weather_pattern",
            Field::ResourceAvailability => "resource_availability",
        }
    }

    pub fn is_cumulative(self) -> bool {
        matches!(self, Field::PlannedValue | Field::EarnedValue | Field::ActualCostCum)
    }

    /// Per-period flows screened for outliers during cleaning.
    pub fn is_flow(self) -> bool {
        matches!(self, Field::EstimateCost | Field::ActualCost)
    }

    pub fn is_required(self) -> bool {
        matches!(
            self,
            Field::EstimateCost | Field::ActualCost | Field::PlannedValue | Field::EarnedValue
        )
    }
}

/// One reporting period. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: Period,
    pub wbs: String,
    pub estimate_cost: Option<f64>,
    pub actual_cost: Option<f64>,
    pub planned_value: Option<f64>,
    pub earned_value: Option<f64>,
    pub actual_cost_cum: Option<f64>,
    pub cost_variance: Option<f64>,
    pub weather_pattern: Option<f64>,
    pub resource_availability: Option<f64>,
}

impl PeriodRecord {
    pub fn empty(period: Period, wbs: &str) -> Self {
        Self {
            period,
            wbs: wbs.to_string(),
            estimate_cost: None,
            actual_cost: None,
            planned_value: None,
            earned_value: None,
            actual_cost_cum: None,
            cost_variance: None,
            weather_pattern: None,
            resource_availability: None,
        }
    }

    pub fn get(&self, field: Field) -> Option<f64> {
        match field {
            Field::EstimateCost => self.estimate_cost,
            Field::ActualCost => self.actual_cost,
            Field::PlannedValue => self.planned_value,
            Field::EarnedValue => self.earned_value,
            Field::ActualCostCum => self.actual_cost_cum,
            Field::CostVariance => self.cost_variance,
            Field::WeatherPattern => self.weather_pattern,
            Field::ResourceAvailability => self.resource_availability,
        }
    }

    pub fn set(&mut self, field: Field, value: Option<f64>) {
        let slot = match field {
            Field::EstimateCost => &mut self.estimate_cost,
            Field::ActualCost => &mut self.actual_cost,
            Field::PlannedValue => &mut self.planned_value,
            Field::EarnedValue => &mut self.earned_value,
            Field::ActualCostCum => &mut self.actual_cost_cum,
            Field::CostVariance => &mut self.cost_variance,
            Field::WeatherPattern => &mut self.weather_pattern,
            Field::ResourceAvailability => &mut self.resource_availability,
        };
        *slot = value;
    }
}

/// Records sorted by `(period, wbs)`, plus which optional columns the
/// source supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectSeries {
    pub records: Vec<PeriodRecord>,
    /// Optional columns present in the source file.
    pub supplied: BTreeSet<Field>,
}

impl ProjectSeries {
    pub fn new(mut records: Vec<PeriodRecord>, supplied: BTreeSet<Field>) -> Self {
        records.sort_by(|a, b| a.period.cmp(&b.period).then_with(|| a.wbs.cmp(&b.wbs)));
        Self { records, supplied }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn span(&self) -> Option<(Period, Period)> {
        Some((self.records.first()?.period, self.records.last()?.period))
    }

    pub fn periods(&self) -> Vec<Period> {
        self.records.iter().map(|r| r.period).collect()
    }

    pub fn has(&self, field: Field) -> bool {
        field.is_required() || self.supplied.contains(&field)
    }

    /// Whether cumulative actual cost is derived from the per-period column.
    pub fn ac_cum_derived(&self) -> bool {
        !self.supplied.contains(&Field::ActualCostCum)
    }

    pub fn wbs_labels(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.wbs.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn filter_wbs(&self, label: &str) -> Result<ProjectSeries, DataError> {
        let records: Vec<PeriodRecord> = self.records.iter().filter(|r| r.wbs == label).cloned().collect();
        if records.is_empty() {
            return Err(DataError::UnknownWbs(label.to_string()));
        }
        Ok(ProjectSeries {
            records,
            supplied: self.supplied.clone(),
        })
    }

    /// Project totals: one record per period, summing every WBS label.
    /// A cell is missing in the total when it is missing for any label.
    pub fn aggregate(&self) -> ProjectSeries {
        if self.wbs_labels().len() <= 1 {
            return self.clone();
        }
        let mut out: Vec<PeriodRecord> = Vec::new();
        for rec in &self.records {
            match out.last_mut() {
                Some(last) if last.period == rec.period => {
                    for field in Field::ALL {
                        let sum = match (last.get(field), rec.get(field)) {
                            (Some(a), Some(b)) => Some(a + b),
                            _ => None,
                        };
                        last.set(field, sum);
                    }
                }
                _ => {
                    let mut r = rec.clone();
                    r.wbs = "TOTAL".to_string();
                    out.push(r);
                }
            }
        }
        ProjectSeries {
            records: out,
            supplied: self.supplied.clone(),
        }
    }

    /// A fully observed column, or `MissingValue` naming the first gap.
    pub fn values(&self, field: Field) -> Result<Vec<f64>, DataError> {
        self.records
            .iter()
            .map(|r| {
                r.get(field).ok_or_else(|| DataError::MissingValue {
                    period: r.period,
                    column: field.name().to_string(),
                })
            })
            .collect()
    }
}
