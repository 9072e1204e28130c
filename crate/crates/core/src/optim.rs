//! Derivative-free minimization with the Nelder-Mead simplex method.
//!
//! Standard coefficients: reflection 1, expansion 2, contraction 0.5,
//! shrink 0.5. The search stops when the simplex diameter (largest distance
//! from the best vertex to any other vertex) drops below `tolerance`, or
//! after `max_iterations` iterations. Non-finite objective values are treated
//! as `+inf`, so the simplex simply moves away from them; the caller decides
//! what a non-finite optimum means.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NelderMeadConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// True when the diameter tolerance was met before the iteration cap.
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` starting from `start`, with the initial simplex built by
/// offsetting one coordinate at a time by the matching entry of `steps`.
pub fn nelder_mead<F>(mut f: F, start: &[f64], steps: &[f64], cfg: &NelderMeadConfig) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(start.len(), steps.len(), "one step per coordinate");
    let n = start.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    if n == 0 {
        let value = eval(start);
        return Minimum {
            x: Vec::new(),
            value,
            iterations: 0,
            evaluations: 1,
            converged: true,
        };
    }

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for (i, step) in steps.iter().enumerate() {
        let mut v = start.to_vec();
        v[i] += if *step == 0.0 { 1e-4 } else { *step };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    loop {
        order(&mut simplex, &mut values);
        if diameter(&simplex) < cfg.tolerance {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iterations {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let f_best = values[0];
        let f_second_worst = values[n - 1];
        let f_worst = values[n];

        along(&centroid, &worst, -REFLECT, &mut trial);
        let f_reflect = eval(&trial);

        if f_reflect < f_best {
            along(&centroid, &worst, -EXPAND, &mut trial2);
            let f_expand = eval(&trial2);
            if f_expand < f_reflect {
                simplex[n].copy_from_slice(&trial2);
                values[n] = f_expand;
            } else {
                simplex[n].copy_from_slice(&trial);
                values[n] = f_reflect;
            }
            continue;
        }
        if f_reflect < f_second_worst {
            simplex[n].copy_from_slice(&trial);
            values[n] = f_reflect;
            continue;
        }

        // Contraction: outside when the reflection beat the worst vertex.
        let (coef, reference) = if f_reflect < f_worst {
            (-CONTRACT, f_reflect)
        } else {
            (CONTRACT, f_worst)
        };
        along(&centroid, &worst, coef, &mut trial2);
        let f_contract = eval(&trial2);
        if f_contract < reference {
            simplex[n].copy_from_slice(&trial2);
            values[n] = f_contract;
            continue;
        }

        let best = simplex[0].clone();
        for i in 1..=n {
            for (x, b) in simplex[i].iter_mut().zip(&best) {
                *x = b + SHRINK * (*x - b);
            }
            values[i] = eval(&simplex[i]);
        }
    }

    Minimum {
        x: simplex[0].clone(),
        value: values[0],
        iterations,
        evaluations,
        converged,
    }
}

/// `out = centroid + coef * (worst - centroid)`.
fn along(centroid: &[f64], worst: &[f64], coef: f64, out: &mut [f64]) {
    for ((o, c), w) in out.iter_mut().zip(centroid).zip(worst) {
        *o = c + coef * (w - c);
    }
}

fn order(simplex: &mut [Vec<f64>], values: &mut [f64]) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let s: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
    let v: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
    simplex.clone_from_slice(&s);
    values.copy_from_slice(&v);
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .map(|v| {
            v.iter()
                .zip(best)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}
