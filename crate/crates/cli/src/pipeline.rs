use std::collections::BTreeMap;
use std::path::Path;

use pforecast::data::{clean, ingest_csv, CleanLog, Field, Period, ProjectSeries};
use pforecast::features::{
    build_feature_table, is_known_in_advance, simulate_exog_future, trailing_mean, FeatureTable, ESTIMATE_COST,
    PLANNED_VALUE, RESOURCE_AVAILABILITY, ROLLING_AVG_PLANNED_VALUE, WEATHER_PATTERN,
};

use crate::config::RunConfig;
use crate::CliError;

pub struct Loaded {
    pub series: ProjectSeries,
    pub table: FeatureTable,
    pub log: CleanLog,
}

/// Ingest, select or total the WBS labels, clean and build features.
pub fn load(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let path = cfg.data.as_deref().ok_or_else(|| CliError::Config("no data file given (--data or \"data\")".into()))?;
    let raw = ingest_csv(path, &cfg.columns).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let selected = match &cfg.wbs {
        Some(label) => raw.filter_wbs(label).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
        None => raw.aggregate(),
    };
    let (series, log) = clean(&selected, &cfg.clean).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let table = build_feature_table(&series, &cfg.exog, cfg.window).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(Loaded { series, table, log })
}

/// Known-in-advance columns of `table` over `range`.
pub fn known_future(table: &FeatureTable, range: std::ops::Range<usize>) -> BTreeMap<String, Vec<f64>> {
    table
        .names()
        .into_iter()
        .filter(|n| is_known_in_advance(n))
        .map(|n| (n.to_string(), table.column(n).expect("listed")[range.clone()].to_vec()))
        .collect()
}

pub struct Plan {
    pub periods: Vec<Period>,
    pub future: BTreeMap<String, Vec<f64>>,
}

/// Reads `horizon` plan rows following the last data period. Exogenous
/// columns missing from the plan continue the seeded simulation.
pub fn read_plan(path: &Path, table: &FeatureTable, cfg: &RunConfig) -> Result<Plan, CliError> {
    let data_err = |m: String| CliError::Data(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data_err(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| data_err(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let period_col = col("period").ok_or_else(|| data_err("missing column period".into()))?;
    let pv_col = col(PLANNED_VALUE).ok_or_else(|| data_err(format!("missing column {PLANNED_VALUE}")))?;
    let optional = [ESTIMATE_COST, WEATHER_PATTERN, RESOURCE_AVAILABILITY].map(|n| (n, col(n)));

    let mut periods = Vec::new();
    let mut cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate().take(cfg.horizon) {
        let row = i + 2;
        let rec = rec.map_err(|e| data_err(e.to_string()))?;
        let cell = |c: usize, name: &str| -> Result<f64, CliError> {
            let s = rec.get(c).unwrap_or("").trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| data_err(format!("row {row}, column {name}: cannot parse {s:?}")))
        };
        let p: Period = rec
            .get(period_col)
            .unwrap_or("")
            .parse()
            .map_err(|e| data_err(format!("row {row}, column period: {e}")))?;
        periods.push(p);
        cols.entry(PLANNED_VALUE.into()).or_default().push(cell(pv_col, PLANNED_VALUE)?);
        for (name, c) in optional {
            if let Some(c) = c {
                cols.entry(name.into()).or_default().push(cell(c, name)?);
            }
        }
    }
    if periods.len() < cfg.horizon {
        return Err(data_err(format!("plan has {} rows, horizon needs {}", periods.len(), cfg.horizon)));
    }
    let mut expected = table.periods().last().map(Period::succ);
    for p in &periods {
        if let Some(e) = expected {
            if *p != e {
                return Err(data_err(format!("plan period {p} does not follow {}", e.add_months(-1))));
            }
        }
        expected = Some(p.succ());
    }

    let (weather, resource) = simulate_exog_future(table.len(), cfg.horizon, &cfg.exog);
    cols.entry(WEATHER_PATTERN.into()).or_insert(weather);
    cols.entry(RESOURCE_AVAILABILITY.into()).or_insert(resource);
    let mut pv: Vec<f64> = table.column(PLANNED_VALUE).unwrap_or(&[]).to_vec();
    let n = pv.len();
    pv.extend(&cols[PLANNED_VALUE]);
    let rolling = (n..pv.len()).map(|t| trailing_mean(&pv, t, cfg.window)).collect();
    cols.insert(ROLLING_AVG_PLANNED_VALUE.into(), rolling);
    Ok(Plan { periods, future: cols })
}

pub fn read_annotations(path: &Path) -> Result<Vec<(Period, String)>, CliError> {
    let data_err = |m: String| CliError::Data(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data_err(e.to_string()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| data_err(e.to_string()))?;
        let p: Period = rec
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|e| data_err(format!("row {}: {e}", i + 2)))?;
        out.push((p, rec.get(1).unwrap_or("").trim().to_string()));
    }
    Ok(out)
}

/// Column for the statistics tables: the ingested cost variance when asked
/// for and present, otherwise the feature table column.
pub fn stats_column(loaded: &Loaded, cfg: &RunConfig, name: &str) -> Result<Vec<f64>, CliError> {
    if cfg.supplied_cost_variance && name == pforecast::features::COST_VARIANCE {
        if !loaded.series.has(Field::CostVariance) {
            return Err(CliError::Data("supplied_cost_variance is set but the data has no cost_variance column".into()));
        }
        return loaded.series.values(Field::CostVariance).map_err(|e| CliError::Data(e.to_string()));
    }
    Ok(loaded.table.column(name).expect("feature column").to_vec())
}
