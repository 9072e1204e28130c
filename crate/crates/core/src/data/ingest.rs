use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Field, Period, PeriodRecord, ProjectSeries};

/// Maps logical fields to CSV header names. Optional columns are ingested
/// only when the header contains them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub period: String,
    pub wbs: String,
    pub estimate_cost: String,
    pub actual_cost: String,
    pub planned_value: String,
    pub earned_value: String,
    pub actual_cost_cum: String,
    pub cost_variance: String,
    pub weather_pattern: String,
    pub resource_availability: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            period: "period".into(),
            wbs: "wbs".into(),
            estimate_cost: Field::EstimateCost.name().into(),
            actual_cost: Field::ActualCost.name().into(),
            planned_value: Field::PlannedValue.name().into(),
            earned_value: Field::EarnedValue.name().into(),
            actual_cost_cum: Field::ActualCostCum.name().into(),
            cost_variance: Field::CostVariance.name().into(),
            weather_pattern: Field::WeatherPattern.name().into(),
            resource_availability: Field::ResourceAvailability.name().into(),
        }
    }
}

impl ColumnMap {
    pub fn header_for(&self, field: Field) -> &str {
        match field {
            Field::EstimateCost => &self.estimate_cost,
            Field::ActualCost => &self.actual_cost,
            Field::PlannedValue => &self.planned_value,
            Field::EarnedValue => &self.earned_value,
            Field::ActualCostCum => &self.actual_cost_cum,
            Field::CostVariance => &self.cost_variance,
            Field::WeatherPattern => &self.weather_pattern,
            Field::ResourceAvailability => &self.resource_availability,
        }
    }
}

pub fn ingest_csv(path: &Path, schema: &ColumnMap) -> Result<ProjectSeries, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_reader(file, schema)
}

/// Reads a CSV stream. Rows are sorted by `(period, wbs)`; when the source has
/// no cumulative actual cost column it is derived per WBS label as the running
/// sum of `actual_cost` (left missing from the first missing flow onwards;
/// cleaning re-derives it).
pub fn ingest_reader<R: Read>(reader: R, schema: &ColumnMap) -> Result<ProjectSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            row: 1,
            column: String::new(),
            message: e.to_string(),
        })?
        .clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();

    let mut missing = Vec::new();
    for name in [&schema.period, &schema.wbs] {
        if !index.contains_key(name.as_str()) {
            missing.push(name.clone());
        }
    }
    for field in Field::ALL.into_iter().filter(|f| f.is_required()) {
        let name = schema.header_for(field);
        if !index.contains_key(name) {
            missing.push(name.to_string());
        }
    }
    if !missing.is_empty() {
        return Err(DataError::MissingColumn(missing));
    }

    let supplied: BTreeSet<Field> = Field::ALL
        .into_iter()
        .filter(|f| !f.is_required() && index.contains_key(schema.header_for(*f)))
        .collect();
    let columns: Vec<(Field, usize)> = Field::ALL
        .into_iter()
        .filter_map(|f| index.get(schema.header_for(f)).map(|&i| (f, i)))
        .collect();
    let period_idx = index[schema.period.as_str()];
    let wbs_idx = index[schema.wbs.as_str()];

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let row = row.map_err(|e| DataError::Parse {
            row: line,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |idx: usize| row.get(idx).unwrap_or("");
        let period: Period = cell(period_idx).parse().map_err(|e: super::PeriodParseError| DataError::Parse {
            row: line,
            column: schema.period.clone(),
            message: e.to_string(),
        })?;
        let wbs = cell(wbs_idx).to_string();
        if !seen.insert((period, wbs.clone())) {
            return Err(DataError::DuplicatePeriod { period, wbs });
        }
        let mut rec = PeriodRecord::empty(period, &wbs);
        for &(field, idx) in &columns {
            let raw = cell(idx);
            if raw.is_empty() {
                continue;
            }
            let value: f64 = raw.parse().map_err(|_| DataError::Parse {
                row: line,
                column: schema.header_for(field).to_string(),
                message: format!("not a number: {raw:?}"),
            })?;
            if !value.is_finite() {
                return Err(DataError::Parse {
                    row: line,
                    column: schema.header_for(field).to_string(),
                    message: format!("non-finite value {raw:?}"),
                });
            }
            rec.set(field, Some(value));
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(DataError::EmptyInput);
    }

    let mut series = ProjectSeries::new(records, supplied);
    if series.ac_cum_derived() {
        derive_ac_cum(&mut series);
    }
    Ok(series)
}

/// Writes `series` in the ingestion format. Required columns always appear;
/// optional ones only when some record has a value. Values use the shortest
/// representation that reads back exactly.
pub fn write_csv<W: Write>(series: &ProjectSeries, schema: &ColumnMap, out: W) -> std::io::Result<()> {
    let fields: Vec<Field> = Field::ALL
        .into_iter()
        .filter(|f| f.is_required() || series.records.iter().any(|r| r.get(*f).is_some()))
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![schema.period.as_str(), schema.wbs.as_str()];
    header.extend(fields.iter().map(|f| schema.header_for(*f)));
    w.write_record(&header)?;
    for rec in &series.records {
        let mut row = vec![rec.period.to_string(), rec.wbs.clone()];
        row.extend(fields.iter().map(|f| rec.get(*f).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()
}

/// Running sum of `actual_cost` per WBS label.
pub(crate) fn derive_ac_cum(series: &mut ProjectSeries) {
    let mut running: HashMap<String, Option<f64>> = HashMap::new();
    for rec in &mut series.records {
        let acc = running.entry(rec.wbs.clone()).or_insert(Some(0.0));
        *acc = match (*acc, rec.actual_cost) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        rec.actual_cost_cum = *acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "period,wbs,estimate_cost,actual_cost,planned_value,earned_value\n";

    fn ingest(text: &str) -> Result<ProjectSeries, DataError> {
        ingest_reader(text.as_bytes(), &ColumnMap::default())
    }

    #[test]
    fn write_then_ingest_round_trips() {
        let s = ingest(&format!("{HEADER}2011-01,A,10.5,9,100,90\n2011-02,A,,11,200,180\n2011-03,A,0.1,10,300,270\n")).unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &ColumnMap::default(), &mut buf).unwrap();
        let back = ingest_reader(buf.as_slice(), &ColumnMap::default()).unwrap();
        assert_eq!(back.records, s.records);
    }

    #[test]
    fn three_rows_sorted() {
        let s = ingest(&format!(
            "{HEADER}2011-01,A,10,9,100,90\n2011-02,A,12,11,200,180\n2011-03,A,8,10,300,270\n"
        ))
        .unwrap();
        assert_eq!(s.len(), 3);
        let periods: Vec<String> = s.periods().iter().map(|p| p.to_string()).collect();
        assert_eq!(periods, ["2011-01", "2011-02", "2011-03"]);
        assert_eq!(s.values(Field::ActualCostCum).unwrap(), vec![9.0, 20.0, 30.0]);
        assert!(s.ac_cum_derived());
    }

    #[test]
    fn shuffled_rows_give_same_series() {
        let sorted = ingest(&format!(
            "{HEADER}2011-01,A,10,9,100,90\n2011-02,A,12,11,200,180\n2011-03,A,8,10,300,270\n"
        ))
        .unwrap();
        let shuffled = ingest(&format!(
            "{HEADER}2011-03,A,8,10,300,270\n2011-01,A,10,9,100,90\n2011-02,A,12,11,200,180\n"
        ))
        .unwrap();
        assert_eq!(sorted, shuffled);
    }

    #[test]
    fn missing_earned_value_column_is_named() {
        let err = ingest("period,wbs,estimate_cost,actual_cost,planned_value\n2011-01,A,1,1,1\n").unwrap_err();
        match err {
            DataError::MissingColumn(names) => assert_eq!(names, vec!["earned_value".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_error_locates_row_and_column() {
        let err = ingest(&format!("{HEADER}2011-01,A,10,9,100,90\n2011-02,A,abc,11,200,180\n")).unwrap_err();
        match err {
            DataError::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "estimate_cost");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(ingest(HEADER), Err(DataError::EmptyInput)));
    }

    #[test]
    fn empty_cells_are_missing() {
        let s = ingest(&format!("{HEADER}2011-01,A,10,,100,90\n2011-02,A,12,11,200,180\n")).unwrap();
        assert_eq!(s.records[0].actual_cost, None);
        assert_eq!(s.records[1].actual_cost_cum, None);
    }

    #[test]
    fn duplicate_period_rejected() {
        let err = ingest(&format!("{HEADER}2011-01,A,1,1,1,1\n2011-01,A,1,1,1,1\n")).unwrap_err();
        assert!(matches!(err, DataError::DuplicatePeriod { .. }));
    }

    #[test]
    fn optional_columns_and_custom_names() {
        let schema = ColumnMap {
            earned_value: "EV".into(),
            ..ColumnMap::default()
        };
        let text = "period,wbs,estimate_cost,actual_cost,planned_value,EV,weather_pattern\n2011-01,A,1,1,1,1,7\n";
        let s = ingest_reader(text.as_bytes(), &schema).unwrap();
        assert!(s.supplied.contains(&Field::WeatherPattern));
        assert_eq!(s.records[0].weather_pattern, Some(7.0));
        assert_eq!(s.records[0].earned_value, Some(1.0));
    }

    #[test]
    fn multiple_wbs_labels_sum_per_period() {
        let s = ingest(&format!(
            "{HEADER}2011-01,B,1,2,3,4\n2011-01,A,10,20,30,40\n2011-02,A,10,20,60,80\n2011-02,B,1,2,6,8\n"
        ))
        .unwrap();
        assert_eq!(s.wbs_labels(), vec!["A", "B"]);
        assert_eq!(s.records[0].wbs, "A");
        let total = s.aggregate();
        assert_eq!(total.len(), 2);
        assert_eq!(total.values(Field::PlannedValue).unwrap(), vec![33.0, 66.0]);
        assert_eq!(total.values(Field::ActualCostCum).unwrap(), vec![22.0, 44.0]);
        assert_eq!(s.filter_wbs("B").unwrap().values(Field::EarnedValue).unwrap(), vec![4.0, 8.0]);
    }
}
