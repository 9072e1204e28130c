use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::LstmError;
use crate::rng::SplitMix64;

/// Dense row-major matrix. Serialized as nested row arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn glorot(rows: usize, cols: usize, rng: &mut SplitMix64) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.next_symmetric(limit)).collect(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `out += self · x`
    fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// `out += selfᵀ · dz`
    fn mul_t_add(&self, dz: &[f64], out: &mut [f64]) {
        for (r, d) in dz.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * d;
            }
        }
    }

    /// `self += dz ⊗ x`
    fn outer_add(&mut self, dz: &[f64], x: &[f64]) {
        for (r, d) in dz.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (a, b) in row.iter_mut().zip(x) {
                *a += d * b;
            }
        }
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = (0..self.rows).map(|r| &self.data[r * self.cols..(r + 1) * self.cols]).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }
}

/// One gate: input weights `w` (hidden × input), recurrent weights `u`
/// (hidden × hidden) and bias `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl Gate {
    fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            w: Matrix::zeros(hidden, input),
            u: Matrix::zeros(hidden, hidden),
            b: vec![0.0; hidden],
        }
    }

    fn pre_activation(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut z = self.b.clone();
        self.w.mul_add(x, &mut z);
        self.u.mul_add(h, &mut z);
        z
    }
}

/// Gates in the fixed order input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub input: Gate,
    pub forget: Gate,
    pub output: Gate,
    pub candidate: Gate,
}

impl LstmLayer {
    fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            input: Gate::zeros(hidden, input),
            forget: Gate::zeros(hidden, input),
            output: Gate::zeros(hidden, input),
            candidate: Gate::zeros(hidden, input),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.input.b.len()
    }

    pub fn input_size(&self) -> usize {
        self.input.w.cols
    }

    fn gates(&self) -> [&Gate; 4] {
        [&self.input, &self.forget, &self.output, &self.candidate]
    }

    fn gates_mut(&mut self) -> [&mut Gate; 4] {
        [&mut self.input, &mut self.forget, &mut self.output, &mut self.candidate]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub layers: Vec<LstmLayer>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

pub(crate) const GATE_NAMES: [&str; 4] = ["i", "f", "o", "g"];

impl LstmParams {
    /// All-zero parameters; also the shape of a gradient.
    pub fn zeros(inputs: usize, hidden: usize, layers: usize) -> Self {
        Self {
            layers: (0..layers)
                .map(|l| LstmLayer::zeros(hidden, if l == 0 { inputs } else { hidden }))
                .collect(),
            w_out: vec![0.0; hidden],
            b_out: 0.0,
        }
    }

    /// Glorot-uniform weights drawn from `SplitMix64::new(seed)`, biases zero
    /// except the forget gate (1.0) and the output bias (0.0).
    ///
    /// Draw order: for each layer, for each gate in the order i, f, o, g, the
    /// input weights row-major, then the recurrent weights row-major; finally
    /// the output head `w_out`.
    pub fn glorot(inputs: usize, hidden: usize, layers: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut p = Self::zeros(inputs, hidden, layers);
        for layer in &mut p.layers {
            let input = layer.input_size();
            for (k, gate) in layer.gates_mut().into_iter().enumerate() {
                gate.w = Matrix::glorot(hidden, input, &mut rng);
                gate.u = Matrix::glorot(hidden, hidden, &mut rng);
                if k == 1 {
                    gate.b = vec![1.0; hidden];
                }
            }
        }
        let limit = (6.0 / (hidden + 1) as f64).sqrt();
        p.w_out = (0..hidden).map(|_| rng.next_symmetric(limit)).collect();
        p
    }

    pub fn hidden_size(&self) -> usize {
        self.w_out.len()
    }

    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, LstmLayer::input_size)
    }

    /// Named tensors in a fixed order: per layer `W_i U_i b_i ... W_g U_g b_g`
    /// (prefixed `l{k}.`), then `w_out` and `b_out`.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (gate, name) in layer.gates().into_iter().zip(GATE_NAMES) {
                out.push((format!("l{l}.W_{name}"), &gate.w.data));
                out.push((format!("l{l}.U_{name}"), &gate.u.data));
                out.push((format!("l{l}.b_{name}"), &gate.b));
            }
        }
        out.push(("w_out".into(), &self.w_out));
        out.push(("b_out".into(), std::slice::from_ref(&self.b_out)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in &mut self.layers {
            for gate in layer.gates_mut() {
                out.push(&mut gate.w.data);
                out.push(&mut gate.u.data);
                out.push(&mut gate.b);
            }
        }
        out.push(&mut self.w_out);
        out.push(std::slice::from_mut(&mut self.b_out));
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, t)| t.iter().copied()).collect()
    }

    pub fn assign(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v = *it.next().expect("flat vector matches parameter count");
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn check_window(&self, window: &[Vec<f64>]) -> Result<(), LstmError> {
        if window.is_empty() {
            return Err(LstmError::ShapeMismatch("empty window".into()));
        }
        let f = self.input_size();
        if let Some(row) = window.iter().find(|r| r.len() != f) {
            return Err(LstmError::ShapeMismatch(format!("window row has {} features, network expects {f}", row.len())));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Activations retained by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    steps: Vec<Vec<StepCache>>,
    last_hidden: Vec<f64>,
    pub prediction: f64,
}

impl ForwardCache {
    /// Cell states `c_t` of layer `layer`, one vector per time step.
    pub fn cell_states(&self, layer: usize) -> Vec<Vec<f64>> {
        self.steps[layer].iter().map(|s| s.c.clone()).collect()
    }

    /// Gate activations `(i, f, o, g)` of `layer` at step `t`.
    pub fn gates(&self, layer: usize, t: usize) -> (&[f64], &[f64], &[f64], &[f64]) {
        let s = &self.steps[layer][t];
        (&s.i, &s.f, &s.o, &s.g)
    }
}

/// Runs the window (one row of features per time step, oldest first) through
/// the network from zero initial state and returns `w_out · h_last + b_out`.
pub fn forward(params: &LstmParams, window: &[Vec<f64>]) -> Result<(f64, ForwardCache), LstmError> {
    params.check_window(window)?;
    let mut inputs: Vec<Vec<f64>> = window.to_vec();
    let mut steps = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let hdim = layer.hidden_size();
        let mut h = vec![0.0; hdim];
        let mut c = vec![0.0; hdim];
        let mut layer_steps = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        for x in inputs {
            let i: Vec<f64> = layer.input.pre_activation(&x, &h).into_iter().map(sigmoid).collect();
            let f: Vec<f64> = layer.forget.pre_activation(&x, &h).into_iter().map(sigmoid).collect();
            let o: Vec<f64> = layer.output.pre_activation(&x, &h).into_iter().map(sigmoid).collect();
            let g: Vec<f64> = layer.candidate.pre_activation(&x, &h).into_iter().map(f64::tanh).collect();
            let c_new: Vec<f64> = (0..hdim).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
            let h_new: Vec<f64> = (0..hdim).map(|k| o[k] * tanh_c[k]).collect();
            layer_steps.push(StepCache {
                x,
                h_prev: std::mem::replace(&mut h, h_new.clone()),
                c_prev: std::mem::replace(&mut c, c_new.clone()),
                i,
                f,
                o,
                g,
                c: c_new,
                tanh_c,
            });
            outputs.push(h_new);
        }
        steps.push(layer_steps);
        inputs = outputs;
    }
    let last_hidden = inputs.pop().expect("non-empty window");
    let prediction = params.b_out + params.w_out.iter().zip(&last_hidden).map(|(a, b)| a * b).sum::<f64>();
    Ok((
        prediction,
        ForwardCache {
            steps,
            last_hidden,
            prediction,
        },
    ))
}

/// Gradient of `(prediction - target)^2` with respect to every parameter,
/// by reverse accumulation through all time steps and layers.
pub fn backward(params: &LstmParams, cache: &ForwardCache, target: f64) -> LstmParams {
    let hidden = params.hidden_size();
    let mut grad = LstmParams::zeros(params.input_size(), hidden, params.layers.len());
    let dy = 2.0 * (cache.prediction - target);
    grad.b_out = dy;
    grad.w_out = cache.last_hidden.iter().map(|h| dy * h).collect();

    let steps_len = cache.steps.first().map_or(0, Vec::len);
    // Gradient reaching each step's hidden output from above.
    let mut dh_ext: Vec<Vec<f64>> = vec![vec![0.0; hidden]; steps_len];
    if let Some(last) = dh_ext.last_mut() {
        *last = params.w_out.iter().map(|w| dy * w).collect();
    }

    for (l, layer) in params.layers.iter().enumerate().rev() {
        let g_layer = &mut grad.layers[l];
        let input_dim = layer.input_size();
        let mut dx_all = vec![vec![0.0; input_dim]; steps_len];
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        for t in (0..steps_len).rev() {
            let s = &cache.steps[l][t];
            let mut dz = [vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden]];
            for k in 0..hidden {
                let dh = dh_ext[t][k] + dh_next[k];
                let d_o = dh * s.tanh_c[k];
                let dc = dc_next[k] + dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let di = dc * s.g[k];
                let dg = dc * s.i[k];
                let df = dc * s.c_prev[k];
                dc_next[k] = dc * s.f[k];
                dz[0][k] = di * s.i[k] * (1.0 - s.i[k]);
                dz[1][k] = df * s.f[k] * (1.0 - s.f[k]);
                dz[2][k] = d_o * s.o[k] * (1.0 - s.o[k]);
                dz[3][k] = dg * (1.0 - s.g[k] * s.g[k]);
            }
            dh_next = vec![0.0; hidden];
            for ((gate, ggate), dzk) in layer.gates().into_iter().zip(g_layer.gates_mut()).zip(&dz) {
                ggate.w.outer_add(dzk, &s.x);
                ggate.u.outer_add(dzk, &s.h_prev);
                for (b, d) in ggate.b.iter_mut().zip(dzk) {
                    *b += d;
                }
                gate.w.mul_t_add(dzk, &mut dx_all[t]);
                gate.u.mul_t_add(dzk, &mut dh_next);
            }
        }
        dh_ext = dx_all;
    }
    grad
}

/// Central finite-difference gradient of the squared error, perturbing each
/// parameter by `±step`.
pub fn numeric_gradient(params: &LstmParams, window: &[Vec<f64>], target: f64, step: f64) -> Result<LstmParams, LstmError> {
    let base = params.flatten();
    let mut work = params.clone();
    let mut grad = vec![0.0; base.len()];
    for (k, g) in grad.iter_mut().enumerate() {
        let mut plus = base.clone();
        plus[k] += step;
        work.assign(&plus);
        let lp = (forward(&work, window)?.0 - target).powi(2);
        let mut minus = base.clone();
        minus[k] -= step;
        work.assign(&minus);
        let lm = (forward(&work, window)?.0 - target).powi(2);
        *g = (lp - lm) / (2.0 * step);
    }
    let mut out = params.clone();
    out.assign(&grad);
    Ok(out)
}

/// Largest per-tensor relative error `max_k |a_k - n_k| / max(|a_k|, |n_k|, floor)`
/// between analytic and numeric gradients, by tensor name.
pub fn gradient_relative_errors(analytic: &LstmParams, numeric: &LstmParams, floor: f64) -> Vec<(String, f64)> {
    analytic
        .tensors()
        .into_iter()
        .zip(numeric.tensors())
        .map(|((name, a), (_, n))| {
            let err = a
                .iter()
                .zip(n)
                .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
                .fold(0.0, f64::max);
            (name, err)
        })
        .collect()
}
