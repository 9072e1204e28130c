//! Seeded synthetic data: ARMA sample paths and a monthly project generator
//! used by tests, benchmarks and `simulate` style experiments.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{Field, Period, PeriodRecord, ProjectSeries};
use crate::features::{simulate_exog, ExogConfig};
use crate::rng::SplitMix64;

const BURN_IN: usize = 200;

/// ARMA(p, q) path `x_t = c + Σ φ_i x_{t-i} + e_t + Σ θ_j e_{t-j}` with
/// Gaussian innovations of standard deviation `sigma`. The first 200 draws
/// are discarded so the returned `n` values start near stationarity.
pub fn arma_series(phi: &[f64], theta: &[f64], c: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let total = n + BURN_IN;
    let mut x = vec![0.0; total];
    let mut e = vec![0.0; total];
    for t in 0..total {
        e[t] = sigma * rng.next_gaussian();
        let mut v = c + e[t];
        for (i, p) in phi.iter().enumerate() {
            if t > i {
                v += p * x[t - i - 1];
            }
        }
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                v += th * e[t - j - 1];
            }
        }
        x[t] = v;
    }
    x.split_off(BURN_IN)
}

/// Parameters of [`generate_project`]. Defaults describe a 60-month project
/// whose plan follows a logistic S-curve that is essentially complete by
/// month 48.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub seed: u64,
    pub periods: usize,
    pub start: Period,
    pub budget: f64,
    /// Month at which half the budget is planned to be spent.
    pub midpoint: f64,
    /// Logistic time scale in months.
    pub spread: f64,
    /// AR(1) coefficient and innovation sd of the productivity deviation.
    pub productivity_phi: f64,
    pub productivity_sigma: f64,
    /// Relative productivity loss per weather index point above the midpoint.
    pub weather_effect: f64,
    /// Relative productivity change per percent of resource availability.
    pub resource_effect: f64,
    /// Share of the schedule backlog worked off each month.
    pub catch_up: f64,
    /// Mean cost per unit of earned value.
    pub cost_factor: f64,
    /// Relative cost increase per weather index point above the midpoint.
    pub weather_cost_effect: f64,
    pub cost_noise: f64,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            periods: 60,
            start: Period::new(2011, 1).expect("valid month"),
            budget: 1_000_000.0,
            midpoint: 24.0,
            spread: 5.0,
            productivity_phi: 0.8,
            productivity_sigma: 0.06,
            weather_effect: 0.02,
            resource_effect: 0.005,
            catch_up: 0.15,
            cost_factor: 1.05,
            weather_cost_effect: 0.01,
            cost_noise: 0.02,
        }
    }
}

/// Cumulative planned value of the logistic plan, scaled to reach `budget`
/// at the last period.
pub fn s_curve(cfg: &ProjectConfig) -> Vec<f64> {
    let logistic = |t: f64| 1.0 / (1.0 + (-(t - cfg.midpoint) / cfg.spread).exp());
    let first = logistic(0.0);
    let last = logistic(cfg.periods.saturating_sub(1) as f64);
    (0..cfg.periods)
        .map(|t| cfg.budget * (logistic(t as f64) - first) / (last - first))
        .collect()
}

/// One synthetic project (single WBS label `P`).
///
/// Earned value grows by the planned increment plus a share of the schedule
/// backlog, scaled by a productivity multiplier: an AR(1) deviation around 1
/// combined with the weather and resource effects of the same month. Earned
/// value never exceeds the budget. Actual cost is the earned increment times
/// a cost factor that rises with bad weather. Weather and resource
/// availability are the exogenous columns simulated with
/// `ExogConfig::with_seed(cfg.seed)` and are stored as supplied columns.
pub fn generate_project(cfg: &ProjectConfig) -> ProjectSeries {
    let n = cfg.periods;
    let pv = s_curve(cfg);
    let (weather, resource) = simulate_exog(n, &ExogConfig::with_seed(cfg.seed));
    // Separate stream for the process noise so the exogenous columns match
    // what feature building would simulate for the same seed.
    let mut rng = SplitMix64::new(SplitMix64::derive_seed(cfg.seed, 1));
    let mut deviation = 0.0;
    let mut ev = 0.0;
    let mut ac = 0.0;
    let mut records = Vec::with_capacity(n);
    for t in 0..n {
        let planned_inc = if t == 0 { pv[0] } else { pv[t] - pv[t - 1] };
        let prev_pv = if t == 0 { 0.0 } else { pv[t - 1] };
        deviation = cfg.productivity_phi * deviation + cfg.productivity_sigma * rng.next_gaussian();
        let w = weather[t] - 5.5;
        let multiplier = ((1.0 + deviation) * (1.0 - cfg.weather_effect * w) * (1.0 + cfg.resource_effect * (resource[t] - 90.0))).max(0.0);
        let backlog = (prev_pv - ev).max(0.0);
        let earned = ((planned_inc + cfg.catch_up * backlog) * multiplier).min(cfg.budget - ev).max(0.0);
        ev += earned;
        let unit_cost = (cfg.cost_factor * (1.0 + cfg.weather_cost_effect * w) + cfg.cost_noise * rng.next_gaussian()).max(0.0);
        let estimate = planned_inc * (1.0 + 0.05 * rng.next_gaussian()).max(0.0);
        let mut rec = PeriodRecord::empty(cfg.start.add_months(t as i64), "P");
        rec.estimate_cost = Some(estimate);
        let cost = earned * unit_cost;
        ac += cost;
        rec.actual_cost = Some(cost);
        rec.actual_cost_cum = Some(ac);
        rec.planned_value = Some(pv[t]);
        rec.earned_value = Some(ev);
        rec.weather_pattern = Some(weather[t]);
        rec.resource_availability = Some(resource[t]);
        records.push(rec);
    }
    let supplied: BTreeSet<Field> = [Field::WeatherPattern, Field::ResourceAvailability].into_iter().collect();
    ProjectSeries::new(records, supplied)
}
