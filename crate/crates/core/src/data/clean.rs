use std::fmt;

use serde::{Deserialize, Serialize};

use super::ingest::derive_ac_cum;
use super::stats::quantile_type7;
use super::{DataError, Field, Period, PeriodRecord, ProjectSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    LinearInterpolate,
    DropPeriod,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutlierPolicy {
    FlagOnly,
    Winsorize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanPolicy {
    pub missing: MissingPolicy,
    pub outlier: OutlierPolicy,
    pub iqr_multiplier: f64,
}

impl Default for CleanPolicy {
    fn default() -> Self {
        Self {
            missing: MissingPolicy::LinearInterpolate,
            outlier: OutlierPolicy::FlagOnly,
            iqr_multiplier: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CleanAction {
    Interpolate,
    Backfill,
    ForwardFill,
    InsertPeriod,
    DropPeriod,
    Gap,
    OutlierFlag,
    Winsorize,
    MonotoneFix,
}

impl fmt::Display for CleanAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CleanAction::Interpolate => "interpolate",
            CleanAction::Backfill => "backfill",
            CleanAction::ForwardFill => "forwardfill",
            CleanAction::InsertPeriod => "insert-period",
            CleanAction::DropPeriod => "drop-period",
            CleanAction::Gap => "gap",
            CleanAction::OutlierFlag => "outlier-flag",
            CleanAction::Winsorize => "winsorize",
            CleanAction::MonotoneFix => "monotone-fix",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanEntry {
    pub period: Period,
    pub column: String,
    pub action: CleanAction,
    pub old: Option<f64>,
    pub new: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleanLog {
    pub entries: Vec<CleanEntry>,
}

impl CleanLog {
    fn push(&mut self, period: Period, column: &str, action: CleanAction, old: Option<f64>, new: Option<f64>) {
        self.entries.push(CleanEntry {
            period,
            column: column.to_string(),
            action,
            old,
            new,
        });
    }

    /// One `<period>,<column>,<action>,<old>,<new>` line per entry; missing
    /// values are empty fields.
    pub fn to_text(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        self.entries
            .iter()
            .map(|e| format!("{},{},{},{},{}\n", e.period, e.column, e.action, cell(e.old), cell(e.new)))
            .collect()
    }
}

/// Tukey fences `(q1 - k*IQR, q3 + k*IQR)` from type-7 quartiles.
pub fn iqr_fences(column: &[f64], k: f64) -> (f64, f64) {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_type7(&sorted, 0.25);
    let q3 = quantile_type7(&sorted, 0.75);
    let iqr = q3 - q1;
    (q1 - k * iqr, q3 + k * iqr)
}

/// Fills missing cells in place: interior gaps by linear interpolation
/// between the neighbouring observations, leading gaps with the first
/// observed value, trailing gaps with the last. Returns the filled positions
/// and the action taken, or `None` if nothing was observed.
pub fn fill_missing(values: &mut [Option<f64>]) -> Option<Vec<(usize, CleanAction)>> {
    let observed: Vec<usize> = values.iter().enumerate().filter_map(|(i, v)| v.map(|_| i)).collect();
    let (&first, &last) = (observed.first()?, observed.last()?);
    let mut filled = Vec::new();
    for i in 0..first {
        values[i] = values[first];
        filled.push((i, CleanAction::Backfill));
    }
    for i in (last + 1)..values.len() {
        values[i] = values[last];
        filled.push((i, CleanAction::ForwardFill));
    }
    for pair in observed.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (va, vb) = (values[a].unwrap(), values[b].unwrap());
        for i in (a + 1)..b {
            let t = (i - a) as f64 / (b - a) as f64;
            values[i] = Some(va + t * (vb - va));
            filled.push((i, CleanAction::Interpolate));
        }
    }
    filled.sort_by_key(|&(i, _)| i);
    Some(filled)
}

/// Cleans every WBS label independently: fills or rejects calendar gaps and
/// missing cells, screens per-period flows for IQR outliers, re-derives the
/// cumulative actual cost when it was derived at ingestion, and restores the
/// monotone cumulative curves (or fails under the `fail` policy).
pub fn clean(series: &ProjectSeries, policy: &CleanPolicy) -> Result<(ProjectSeries, CleanLog), DataError> {
    if series.is_empty() {
        return Err(DataError::EmptyInput);
    }
    if !(policy.iqr_multiplier > 0.0) {
        return Err(DataError::FailedInvariant {
            period: series.records[0].period,
            column: "iqr_multiplier".into(),
            message: "must be positive".into(),
        });
    }
    let mut log = CleanLog::default();
    let mut out = Vec::with_capacity(series.len());
    for label in series.wbs_labels() {
        let group: Vec<PeriodRecord> = series.records.iter().filter(|r| r.wbs == label).cloned().collect();
        out.extend(clean_group(group, series, policy, &mut log)?);
    }
    let mut cleaned = ProjectSeries::new(out, series.supplied.clone());
    if cleaned.ac_cum_derived() {
        derive_ac_cum(&mut cleaned);
    }
    for label in cleaned.wbs_labels() {
        enforce_monotone(&mut cleaned, &label, policy, &mut log)?;
    }
    check_non_negative(&cleaned)?;
    Ok((cleaned, log))
}

fn cleaned_fields(series: &ProjectSeries) -> Vec<Field> {
    Field::ALL
        .into_iter()
        .filter(|&f| series.has(f) && !(f == Field::ActualCostCum && series.ac_cum_derived()))
        .collect()
}

fn clean_group(
    mut group: Vec<PeriodRecord>,
    series: &ProjectSeries,
    policy: &CleanPolicy,
    log: &mut CleanLog,
) -> Result<Vec<PeriodRecord>, DataError> {
    let label = group[0].wbs.clone();

    // Calendar gaps.
    let mut contiguous = Vec::with_capacity(group.len());
    for rec in group.drain(..) {
        if let Some(prev) = contiguous.last().map(|r: &PeriodRecord| r.period) {
            let mut next = prev.succ();
            while next < rec.period {
                match policy.missing {
                    MissingPolicy::Fail => {
                        return Err(DataError::Gap {
                            period: rec.period,
                            wbs: label,
                        })
                    }
                    MissingPolicy::LinearInterpolate => {
                        log.push(next, "period", CleanAction::InsertPeriod, None, None);
                        contiguous.push(PeriodRecord::empty(next, &label));
                    }
                    MissingPolicy::DropPeriod => log.push(next, "period", CleanAction::Gap, None, None),
                }
                next = next.succ();
            }
        }
        contiguous.push(rec);
    }
    let mut group = contiguous;

    let fields = cleaned_fields(series);
    match policy.missing {
        MissingPolicy::LinearInterpolate => {
            for &field in &fields {
                let mut col: Vec<Option<f64>> = group.iter().map(|r| r.get(field)).collect();
                let filled = fill_missing(&mut col).ok_or_else(|| DataError::AllMissingColumn(field.name().into()))?;
                for (i, action) in filled {
                    log.push(group[i].period, field.name(), action, None, col[i]);
                    group[i].set(field, col[i]);
                }
            }
        }
        MissingPolicy::DropPeriod => {
            group.retain(|r| {
                let gaps: Vec<Field> = fields.iter().copied().filter(|&f| r.get(f).is_none()).collect();
                for f in &gaps {
                    log.push(r.period, f.name(), CleanAction::DropPeriod, None, None);
                }
                gaps.is_empty()
            });
            if group.is_empty() {
                return Err(DataError::EmptyInput);
            }
        }
        MissingPolicy::Fail => {
            for r in &group {
                if let Some(f) = fields.iter().find(|&&f| r.get(f).is_none()) {
                    return Err(DataError::MissingValue {
                        period: r.period,
                        column: f.name().into(),
                    });
                }
            }
        }
    }

    for field in fields.into_iter().filter(|f| f.is_flow()) {
        let col: Vec<f64> = group.iter().map(|r| r.get(field).unwrap()).collect();
        let (lo, hi) = iqr_fences(&col, policy.iqr_multiplier);
        for rec in group.iter_mut() {
            let v = rec.get(field).unwrap();
            if v < lo || v > hi {
                match policy.outlier {
                    OutlierPolicy::FlagOnly => log.push(rec.period, field.name(), CleanAction::OutlierFlag, Some(v), Some(v)),
                    OutlierPolicy::Winsorize => {
                        let w = v.clamp(lo, hi);
                        log.push(rec.period, field.name(), CleanAction::Winsorize, Some(v), Some(w));
                        rec.set(field, Some(w));
                    }
                }
            }
        }
    }
    Ok(group)
}

fn enforce_monotone(
    series: &mut ProjectSeries,
    label: &str,
    policy: &CleanPolicy,
    log: &mut CleanLog,
) -> Result<(), DataError> {
    for field in [Field::PlannedValue, Field::EarnedValue, Field::ActualCostCum] {
        let mut running = f64::NEG_INFINITY;
        for rec in series.records.iter_mut().filter(|r| r.wbs == label) {
            let Some(v) = rec.get(field) else { continue };
            if v < running {
                if policy.missing == MissingPolicy::Fail {
                    return Err(DataError::FailedInvariant {
                        period: rec.period,
                        column: field.name().into(),
                        message: format!("cumulative value decreases from {running} to {v}"),
                    });
                }
                log.push(rec.period, field.name(), CleanAction::MonotoneFix, Some(v), Some(running));
                rec.set(field, Some(running));
            } else {
                running = v;
            }
        }
    }
    Ok(())
}

fn check_non_negative(series: &ProjectSeries) -> Result<(), DataError> {
    for rec in &series.records {
        for field in [Field::PlannedValue, Field::EarnedValue] {
            if let Some(v) = rec.get(field) {
                if v < 0.0 {
                    return Err(DataError::FailedInvariant {
                        period: rec.period,
                        column: field.name().into(),
                        message: format!("negative cumulative value {v}"),
                    });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ingest_reader, ColumnMap};
    use proptest::prelude::*;

    const HEADER: &str = "period,wbs,estimate_cost,actual_cost,planned_value,earned_value\n";

    fn series(body: &str) -> ProjectSeries {
        ingest_reader(format!("{HEADER}{body}").as_bytes(), &ColumnMap::default()).unwrap()
    }

    #[test]
    fn midpoint_interpolation() {
        let mut col = vec![Some(1.0), None, Some(3.0)];
        let filled = fill_missing(&mut col).unwrap();
        assert_eq!(col, vec![Some(1.0), Some(2.0), Some(3.0)]);
        assert_eq!(filled, vec![(1, CleanAction::Interpolate)]);
    }

    #[test]
    fn boundary_gaps_take_nearest_observation() {
        let mut col = vec![None, Some(4.0), None, Some(8.0), None];
        let filled = fill_missing(&mut col).unwrap();
        assert_eq!(col, vec![Some(4.0), Some(4.0), Some(6.0), Some(8.0), Some(8.0)]);
        assert_eq!(
            filled,
            vec![
                (0, CleanAction::Backfill),
                (2, CleanAction::Interpolate),
                (4, CleanAction::ForwardFill)
            ]
        );
        assert!(fill_missing(&mut [None, None]).is_none());
    }

    #[test]
    fn leading_missing_is_backfilled_and_logged() {
        let s = series("2011-01,A,,9,100,90\n2011-02,A,12,11,200,180\n2011-03,A,14,10,300,270\n");
        let (c, log) = clean(&s, &CleanPolicy::default()).unwrap();
        assert_eq!(c.records[0].estimate_cost, Some(12.0));
        assert!(log
            .to_text()
            .lines()
            .any(|l| l == "2011-01,estimate_cost,backfill,,12"));
    }

    #[test]
    fn outlier_flagged_not_changed() {
        // Type-7 quartiles of [1,2,3,100]: q1 = 1.75, q3 = 27.25, upper fence 65.5.
        let (lo, hi) = iqr_fences(&[1.0, 2.0, 3.0, 100.0], 1.5);
        assert_eq!((lo, hi), (1.75 - 38.25, 65.5));
        let s = series("2011-01,A,1,1,1,1\n2011-02,A,2,1,2,2\n2011-03,A,3,1,3,3\n2011-04,A,100,1,4,4\n");
        let (c, log) = clean(&s, &CleanPolicy::default()).unwrap();
        assert_eq!(c.records[3].estimate_cost, Some(100.0));
        assert_eq!(log.to_text(), "2011-04,estimate_cost,outlier-flag,100,100\n");
    }

    #[test]
    fn outlier_winsorized() {
        let s = series("2011-01,A,1,1,1,1\n2011-02,A,2,1,2,2\n2011-03,A,3,1,3,3\n2011-04,A,100,1,4,4\n");
        let policy = CleanPolicy {
            outlier: OutlierPolicy::Winsorize,
            ..CleanPolicy::default()
        };
        let (c, _) = clean(&s, &policy).unwrap();
        assert_eq!(c.records[3].estimate_cost, Some(65.5));
    }

    #[test]
    fn missing_cumulative_ac_rederived_after_fill() {
        let s = series("2011-01,A,1,10,1,1\n2011-02,A,1,,2,2\n2011-03,A,1,30,3,3\n");
        let (c, _) = clean(&s, &CleanPolicy::default()).unwrap();
        assert_eq!(c.values(Field::ActualCost).unwrap(), vec![10.0, 20.0, 30.0]);
        assert_eq!(c.values(Field::ActualCostCum).unwrap(), vec![10.0, 30.0, 60.0]);
    }

    #[test]
    fn decreasing_cumulative_curve() {
        let s = series("2011-01,A,1,1,100,50\n2011-02,A,1,1,90,60\n2011-03,A,1,1,120,70\n");
        let fail = CleanPolicy {
            missing: MissingPolicy::Fail,
            ..CleanPolicy::default()
        };
        assert!(matches!(clean(&s, &fail), Err(DataError::FailedInvariant { .. })));
        let (c, log) = clean(&s, &CleanPolicy::default()).unwrap();
        assert_eq!(c.values(Field::PlannedValue).unwrap(), vec![100.0, 100.0, 120.0]);
        assert_eq!(log.to_text(), "2011-02,planned_value,monotone-fix,90,100\n");
    }

    #[test]
    fn calendar_gap_policies() {
        let s = series("2011-01,A,1,1,10,10\n2011-03,A,1,1,30,30\n");
        let (c, log) = clean(&s, &CleanPolicy::default()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.records[1].period.to_string(), "2011-02");
        assert_eq!(c.records[1].planned_value, Some(20.0));
        assert!(log.to_text().starts_with("2011-02,period,insert-period,,\n"));

        let fail = CleanPolicy {
            missing: MissingPolicy::Fail,
            ..CleanPolicy::default()
        };
        assert!(matches!(clean(&s, &fail), Err(DataError::Gap { .. })));
    }

    #[test]
    fn drop_period_policy() {
        let s = series("2011-01,A,1,1,10,10\n2011-02,A,,1,20,20\n2011-03,A,1,1,30,30\n");
        let policy = CleanPolicy {
            missing: MissingPolicy::DropPeriod,
            ..CleanPolicy::default()
        };
        let (c, log) = clean(&s, &policy).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(log.to_text(), "2011-02,estimate_cost,drop-period,,\n");
    }

    #[test]
    fn fail_policy_reports_missing_cell() {
        let s = series("2011-01,A,1,1,10,10\n2011-02,A,,1,20,20\n");
        let fail = CleanPolicy {
            missing: MissingPolicy::Fail,
            ..CleanPolicy::default()
        };
        assert!(matches!(clean(&s, &fail), Err(DataError::MissingValue { .. })));
    }

    #[test]
    fn all_missing_column_rejected() {
        let s = series("2011-01,A,,1,10,10\n2011-02,A,,1,20,20\n");
        assert!(matches!(
            clean(&s, &CleanPolicy::default()),
            Err(DataError::AllMissingColumn(c)) if c == "estimate_cost"
        ));
    }

    proptest! {
        #[test]
        fn interpolation_fills_everything_and_keeps_observed_cells(
            cells in prop::collection::vec(prop::option::weighted(0.7, -1e6f64..1e6), 1..40)
        ) {
            let mut col = cells.clone();
            match fill_missing(&mut col) {
                None => prop_assert!(cells.iter().all(Option::is_none)),
                Some(_) => {
                    prop_assert!(col.iter().all(Option::is_some));
                    for (before, after) in cells.iter().zip(&col) {
                        if let Some(b) = before {
                            prop_assert_eq!(b.to_bits(), after.unwrap().to_bits());
                        }
                    }
                }
            }
        }
    }
}
