use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pforecast::arima::ols;
use pforecast::data::{corr_matrix, summary, SummaryStats};
use pforecast::evaluation::{compare, cross_validate, fit_forecast, metrics, CvConfig, EvalError, EvalReport, Metrics};
use pforecast::explain::{column_means, explain_lstm, shap_summary, ExplainError, ShapSummary, MAX_FEATURES};
use pforecast::features::{
    rolling_column_of, simulate_exog, FeatureTable, ACTUAL_COST, COST_VARIANCE, EARNED_VALUE, ESTIMATE_COST, FEATURE_COLUMNS,
    PLANNED_VALUE, RESOURCE_AVAILABILITY, WEATHER_PATTERN,
};
use pforecast::lstm::{LstmModel, TrainConfig, WindowSpec};
use serde::Serialize;

use crate::config::{ExplainModel, RunConfig};
use crate::markdown::{self, sig6};
use crate::pipeline::{known_future, load, read_annotations, read_plan, stats_column};
use crate::{svg, CliError};

/// Columns of the correlation table, in display order.
pub const CORRELATION_COLUMNS: [&str; 7] = [
    ESTIMATE_COST,
    ACTUAL_COST,
    COST_VARIANCE,
    PLANNED_VALUE,
    EARNED_VALUE,
    WEATHER_PATTERN,
    RESOURCE_AVAILABILITY,
];

/// `rolling_avg_cost_variance` -> `Rolling Avg Cost Variance`.
pub fn display_name(column: &str) -> String {
    column
        .split('_')
        .map(|w| {
            let mut c = w.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect::<String>()).unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

struct Output {
    root: PathBuf,
}

impl Output {
    fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    fn write(&self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
    }

    fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        s.push('\n');
        self.write(rel, s)
    }

    fn csv(&self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| CliError::Output(e.to_string()))?;
        self.write(rel, buf)
    }
}

fn eval_error(model: &str, e: EvalError) -> CliError {
    match e {
        EvalError::Leakage(_) | EvalError::UnknownColumn(_) | EvalError::InvalidConfig(_) | EvalError::UnsupportedTarget { .. } => {
            CliError::Config(format!("{model}: {e}"))
        }
        EvalError::TooShort { .. } | EvalError::EmptyInput => CliError::Data(format!("{model}: {e}")),
        _ => CliError::Model(format!("{model}: {e}")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsResult {
    pub columns: Vec<String>,
    pub summary: Vec<SummaryStats>,
    pub correlation_columns: Vec<String>,
    pub correlation: Vec<Vec<f64>>,
}

/// Summary statistics of every feature column and correlations of the raw
/// metrics and exogenous factors.
pub fn cmd_stats(cfg: &RunConfig) -> Result<StatsResult, CliError> {
    cfg.validate()?;
    let loaded = load(cfg)?;
    let mut stats_table = FeatureTable::from_periods(loaded.table.periods().to_vec());
    for name in FEATURE_COLUMNS {
        stats_table
            .push(name, stats_column(&loaded, cfg, name)?)
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    let summaries = FEATURE_COLUMNS
        .iter()
        .map(|c| summary(stats_table.column(c).expect("pushed")).map_err(|e| CliError::Data(format!("{c}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let corr = corr_matrix(&stats_table, &CORRELATION_COLUMNS).map_err(|e| CliError::Data(format!("correlation: {e}")))?;

    let out = Output::new(&cfg.out);
    let mut md = String::from("# Summary statistics\n\n");
    md.push_str(&format!("{} periods", loaded.table.len()));
    if let (Some(a), Some(b)) = (loaded.table.periods().first(), loaded.table.periods().last()) {
        md.push_str(&format!(", {a} to {b}"));
    }
    md.push_str(".\n\n");
    let rows: Vec<Vec<String>> = FEATURE_COLUMNS
        .iter()
        .zip(&summaries)
        .map(|(c, s)| {
            let mut r = vec![display_name(c)];
            r.extend([s.min, s.q1, s.median, s.mean, s.q3, s.max].map(sig6));
            r
        })
        .collect();
    md.push_str(&markdown::table(&["Metric", "Min", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max"], &rows));
    md.push_str("\n# Correlation analysis\n\n");
    let labels: Vec<String> = CORRELATION_COLUMNS.iter().map(|c| display_name(c)).collect();
    let mut header = vec!["Metric"];
    header.extend(labels.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = corr
        .iter()
        .zip(&labels)
        .map(|(row, l)| std::iter::once(l.clone()).chain(row.iter().map(|v| sig6(*v))).collect())
        .collect();
    md.push_str(&markdown::table(&header, &rows));
    md.push_str("\n![Correlation matrix](charts/correlation.svg)\n");
    if !loaded.log.entries.is_empty() {
        md.push_str(&format!("\n# Cleaning log\n\n```\n{}```\n", loaded.log.to_text()));
    }
    out.write("report.md", md)?;
    out.write("charts/correlation.svg", svg::heatmap("Correlation matrix", &labels, &corr))?;
    Ok(StatsResult {
        columns: FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        summary: summaries,
        correlation_columns: CORRELATION_COLUMNS.iter().map(|s| s.to_string()).collect(),
        correlation: corr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelForecast {
    pub model: String,
    pub values: Vec<f64>,
    /// Holdout score; `None` when forecasting past the data.
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastResult {
    pub periods: Vec<String>,
    /// Observed values over the forecast periods, when held out.
    pub actual: Option<Vec<f64>>,
    pub forecasts: Vec<ModelForecast>,
    pub failures: Vec<(String, String)>,
}

/// Fits every selected model and forecasts `horizon` periods. Without a
/// plan the last `horizon` observed periods are held out and forecast.
pub fn cmd_forecast(cfg: &RunConfig) -> Result<ForecastResult, CliError> {
    cfg.validate()?;
    let loaded = load(cfg)?;
    let table = &loaded.table;
    let n = table.len();
    let h = cfg.horizon;
    let target = cfg.target.as_str();
    let (history, future, periods, actual) = match &cfg.plan {
        Some(path) => {
            let plan = read_plan(path, table, cfg)?;
            (table.clone(), plan.future, plan.periods, None)
        }
        None => {
            if h >= n {
                return Err(CliError::Config(format!("horizon {h} leaves no history in {n} periods; supply a plan to forecast past the data")));
            }
            let cut = n - h;
            let actual = table.column(target).expect("validated target")[cut..].to_vec();
            (table.rows(0..cut), known_future(table, cut..n), table.periods()[cut..].to_vec(), Some(actual))
        }
    };

    let out = Output::new(&cfg.out);
    let mut forecasts = Vec::new();
    let mut failures = Vec::new();
    for spec in &cfg.models {
        let name = spec.name();
        match fit_forecast(spec, &history, target, h, &future, cfg.seed) {
            Ok((values, fitted)) => {
                out.write_json(&format!("models/{name}.json"), &fitted)?;
                out.csv(&format!("forecasts/{name}.csv"), |buf| {
                    let mut w = csv::Writer::from_writer(buf);
                    w.write_record(["period", "value"])?;
                    for (p, v) in periods.iter().zip(&values) {
                        w.write_record([p.to_string(), v.to_string()])?;
                    }
                    w.flush()
                })?;
                let m = match &actual {
                    Some(a) if !a.is_empty() => Some(metrics(a, &values).map_err(|e| eval_error(name, e))?),
                    _ => None,
                };
                forecasts.push(ModelForecast {
                    model: name.to_string(),
                    values,
                    metrics: m,
                });
            }
            Err(e) => failures.push((name.to_string(), e.to_string())),
        }
    }

    // Chart: observed target over the whole table, forecasts over their periods.
    let mut x_labels: Vec<String> = history.periods().iter().map(ToString::to_string).collect();
    let offset = x_labels.len();
    x_labels.extend(periods.iter().map(ToString::to_string));
    if history.periods().is_empty() {
        x_labels = (0..history.len() + h).map(|i| i.to_string()).collect();
    }
    let mut observed: Vec<Option<f64>> = history.column(target).expect("target").iter().map(|v| Some(*v)).collect();
    match &actual {
        Some(a) => observed.extend(a.iter().map(|v| Some(*v))),
        None => observed.extend(std::iter::repeat_n(None, h)),
    }
    let mut lines = vec![("actual".to_string(), observed)];
    for f in &forecasts {
        let mut ys = vec![None; offset];
        ys.extend(f.values.iter().map(|v| Some(*v)));
        lines.push((f.model.clone(), ys));
    }
    let mut markers = vec![];
    if let Some(path) = &cfg.annotations {
        for (p, label) in read_annotations(path)? {
            if let Some(i) = x_labels.iter().position(|x| *x == p.to_string()) {
                markers.push((i, label));
            }
        }
    }
    out.write(
        "charts/forecast.svg",
        svg::line_chart(&format!("{} forecast", display_name(target)), &x_labels, &lines, &markers),
    )?;

    let mut md = format!("# Forecast of {}\n\n", display_name(target));
    md.push_str(&match &actual {
        Some(_) => format!("The last {h} observed periods were held out and forecast from the {} before them.\n\n", history.len()),
        None => format!("Forecast of {h} periods past the data from the supplied plan.\n\n"),
    });
    let mut header = vec!["Period".to_string()];
    if actual.is_some() {
        header.push("Actual".into());
    }
    header.extend(forecasts.iter().map(|f| f.model.clone()));
    let rows: Vec<Vec<String>> = (0..periods.len())
        .map(|i| {
            let mut r = vec![periods[i].to_string()];
            if let Some(a) = &actual {
                r.push(sig6(a[i]));
            }
            r.extend(forecasts.iter().map(|f| sig6(f.values[i])));
            r
        })
        .collect();
    md.push_str(&markdown::table(&header.iter().map(String::as_str).collect::<Vec<_>>(), &rows));
    if forecasts.iter().any(|f| f.metrics.is_some()) {
        md.push_str("\n## Holdout error\n\n");
        let rows: Vec<Vec<String>> = forecasts
            .iter()
            .filter_map(|f| f.metrics.map(|m| vec![f.model.clone(), sig6(m.mae), sig6(m.mse), sig6(m.rmse)]))
            .collect();
        md.push_str(&markdown::table(&["Model", "MAE", "MSE", "RMSE"], &rows));
    }
    push_failures(&mut md, &failures);
    md.push_str("\n![Forecast](charts/forecast.svg)\n");
    out.write("report.md", md)?;

    let result = ForecastResult {
        periods: periods.iter().map(ToString::to_string).collect(),
        actual,
        forecasts,
        failures,
    };
    if let Some((model, msg)) = result.failures.first() {
        return Err(CliError::Model(format!("{model}: {msg}")));
    }
    Ok(result)
}

fn push_failures(md: &mut String, failures: &[(String, String)]) {
    if !failures.is_empty() {
        md.push_str("\n## Failures\n\n");
        for (m, e) in failures {
            md.push_str(&format!("- {m}: {e}\n"));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateResult {
    pub report: Option<EvalReport>,
    /// Models whose cross-validation could not start at all.
    pub failures: Vec<(String, String)>,
}

/// Cross-validates every selected model on identical splits and ranks them.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluateResult, CliError> {
    cfg.validate()?;
    let loaded = load(cfg)?;
    evaluate_table(&loaded.table, cfg)
}

/// [`cmd_evaluate`] on an already built feature table.
pub fn evaluate_table(table: &FeatureTable, cfg: &RunConfig) -> Result<EvaluateResult, CliError> {
    let cv = CvConfig {
        seed: cfg.seed,
        parallel: cfg.cv.parallel || cfg.parallel,
        ..cfg.cv.clone()
    };
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for spec in &cfg.models {
        match cross_validate(table, &cfg.target, spec, &cv) {
            Ok(r) => reports.push(r),
            Err(e) => failures.push((spec.name().to_string(), e.to_string())),
        }
    }
    let report = if reports.is_empty() {
        None
    } else {
        Some(compare(&reports).map_err(|e| eval_error("compare", e))?)
    };

    let out = Output::new(&cfg.out);
    let mut md = format!("# Model comparison on {}\n\n", display_name(&cfg.target));
    if let Some(r) = &report {
        out.write_json("eval/report.json", r)?;
        out.csv("eval/aggregate.csv", |b| r.write_aggregate_csv(b))?;
        out.csv("eval/folds.csv", |b| r.write_folds_csv(b))?;
        let ranked: Vec<_> = r.ranked().filter(|m| m.mean.is_some()).collect();
        for (metric, get) in [("mae", (|m: &Metrics| m.mae) as fn(&Metrics) -> f64), ("mse", |m| m.mse), ("rmse", |m| m.rmse)] {
            let bars: Vec<(String, f64)> = ranked.iter().map(|m| (m.model.clone(), get(&m.mean.expect("filtered")))).collect();
            out.write(&format!("charts/eval_{metric}.svg"), svg::bar_chart(&metric.to_uppercase(), &bars))?;
        }
        md.push_str(&format!(
            "{} periods, {} splits ({:?}). Mean ± sample sd over successful folds; ranking by mean RMSE, ties by name.\n\n",
            r.n,
            r.splits.len(),
            r.cv.mode
        ));
        let rows: Vec<Vec<String>> = r
            .ranked()
            .enumerate()
            .map(|(i, m)| {
                let cell = |get: fn(&Metrics) -> f64| match (m.mean, m.sd) {
                    (Some(a), Some(s)) => format!("{} ± {}", sig6(get(&a)), sig6(get(&s))),
                    _ => "n/a".into(),
                };
                vec![
                    (i + 1).to_string(),
                    m.model.clone(),
                    cell(|x| x.mae),
                    cell(|x| x.mse),
                    cell(|x| x.rmse),
                    format!("{}/{}", m.folds.len() - m.failed, m.folds.len()),
                ]
            })
            .collect();
        md.push_str(&markdown::table(&["Rank", "Model", "MAE", "MSE", "RMSE", "Folds ok"], &rows));
        md.push_str("\n![MAE](charts/eval_mae.svg)\n![MSE](charts/eval_mse.svg)\n![RMSE](charts/eval_rmse.svg)\n");
        let fold_errors: Vec<(String, String)> = r
            .models
            .iter()
            .flat_map(|m| m.folds.iter().filter_map(move |f| f.error.as_ref().map(|e| (format!("{} fold {}", m.model, f.fold), e.clone()))))
            .collect();
        push_failures(&mut md, &fold_errors);
    }
    push_failures(&mut md, &failures);
    out.write("report.md", md)?;
    if report.is_none() {
        let (m, e) = &failures[0];
        return Err(CliError::Model(format!("no model could be evaluated; {m}: {e}")));
    }
    Ok(EvaluateResult { report, failures })
}

fn explain_error(e: ExplainError) -> CliError {
    match e {
        ExplainError::TooManyFeatures { .. } | ExplainError::EmptyInstances | ExplainError::UnknownColumn(_) => CliError::Config(e.to_string()),
        ExplainError::TooShort { .. } => CliError::Data(e.to_string()),
        _ => CliError::Model(e.to_string()),
    }
}

/// Mean absolute Shapley values of the explain model's features.
pub fn cmd_explain(cfg: &RunConfig) -> Result<ShapSummary, CliError> {
    cfg.validate()?;
    let loaded = load(cfg)?;
    explain_table(&loaded.table, cfg)
}

/// [`cmd_explain`] on an already built feature table.
pub fn explain_table(table: &FeatureTable, cfg: &RunConfig) -> Result<ShapSummary, CliError> {
    let ex = &cfg.explain;
    let target = cfg.target.as_str();
    let features: Vec<String> = if !ex.features.is_empty() {
        ex.features.clone()
    } else {
        FEATURE_COLUMNS
            .iter()
            .filter(|c| ex.model == ExplainModel::Lstm || (**c != target && rolling_column_of(target) != Some(**c)))
            .map(|c| c.to_string())
            .collect()
    };
    if features.len() > MAX_FEATURES {
        return Err(explain_error(ExplainError::TooManyFeatures {
            count: features.len(),
            max: MAX_FEATURES,
        }));
    }
    let out = Output::new(&cfg.out);
    let cols: Vec<&[f64]> = features
        .iter()
        .map(|f| table.column(f).ok_or_else(|| CliError::Config(format!("unknown feature {f}"))))
        .collect::<Result<_, _>>()?;
    let summary = match ex.model {
        ExplainModel::Linear => {
            let y = table.column(target).expect("validated target");
            let fit = ols(y, &cols.iter().map(|c| c.to_vec()).collect::<Vec<_>>()).map_err(|e| CliError::Model(format!("linear: {e}")))?;
            out.write_json("models/explain-linear.json", &LinearModel {
                features: features.clone(),
                intercept: fit.intercept,
                coefficients: fit.coefficients.clone(),
            })?;
            let rows: Vec<Vec<f64>> = (0..table.len()).map(|t| cols.iter().map(|c| c[t]).collect()).collect();
            let background = column_means(&rows).map_err(explain_error)?;
            let keep = ex.last.unwrap_or(rows.len()).min(rows.len());
            let instances = &rows[rows.len() - keep..];
            let (b0, beta) = (fit.intercept, fit.coefficients);
            shap_summary(
                move |x: &[f64]| b0 + x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>(),
                &features,
                instances,
                &background,
            )
            .map_err(explain_error)?
        }
        ExplainModel::Lstm => {
            let spec = WindowSpec {
                window: ex.window,
                features: features.clone(),
                target: target.to_string(),
                horizon: 1,
                rolling_window: cfg.window,
            };
            let train = TrainConfig {
                seed: cfg.seed,
                ..ex.train.clone()
            };
            let model = LstmModel::fit(table, &spec, &train).map_err(|e| CliError::Model(format!("lstm: {e}")))?;
            out.write_json("models/explain-lstm.json", &model)?;
            explain_lstm(&model, table, ex.last).map_err(explain_error)?
        }
    };
    out.csv("eval/shap.csv", |b| summary.write_csv(b))?;
    let bars: Vec<(String, f64)> = summary
        .ranking
        .iter()
        .map(|f| {
            let i = summary.features.iter().position(|x| x == f).expect("ranked");
            (display_name(f), summary.mean_abs[i])
        })
        .collect();
    out.write("charts/shap.svg", svg::hbar_chart("Mean |SHAP value|", &bars))?;
    let mut md = format!(
        "# Feature attribution for {}\n\nExact Shapley values of the {} model over {} instances; absent features take their mean over the table.\n\n",
        display_name(target),
        match ex.model {
            ExplainModel::Linear => "linear",
            ExplainModel::Lstm => "LSTM (most recent window row)",
        },
        summary.attributions.len()
    );
    let rows: Vec<Vec<String>> = bars.iter().enumerate().map(|(i, (f, v))| vec![(i + 1).to_string(), f.clone(), sig6(*v)]).collect();
    md.push_str(&markdown::table(&["Rank", "Feature", "Mean abs SHAP"], &rows));
    md.push_str("\n![SHAP](charts/shap.svg)\n");
    out.write("report.md", md)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct LinearModel {
    features: Vec<String>,
    intercept: f64,
    coefficients: Vec<f64>,
}

/// CSV of `periods` simulated exogenous values.
pub fn cmd_simulate_exog(cfg: &RunConfig, periods: usize) -> Result<String, CliError> {
    cfg.exog.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let (weather, resource) = simulate_exog(periods, &cfg.exog);
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut rows = || -> std::io::Result<()> {
            w.write_record(["index", "weather_pattern", "resource_availability"])?;
            for i in 0..periods {
                w.write_record([i.to_string(), weather[i].to_string(), resource[i].to_string()])?;
            }
            w.flush()
        };
        rows().map_err(|e| CliError::Output(e.to_string()))?;
    }
    Ok(String::from_utf8(buf).expect("ascii csv"))
}

/// Shared by tests: the known-in-advance future of the last `h` rows.
pub fn holdout_future(table: &FeatureTable, h: usize) -> BTreeMap<String, Vec<f64>> {
    known_future(table, table.len() - h..table.len())
}
