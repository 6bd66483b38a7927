use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use super::config::{NetworkConfig, PredictorKind};
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::rng::{seeded, stream, sub_seed};

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerLayout {
    weights: usize,
    bias: usize,
    in_dim: usize,
}

/// Offsets of every parameter block in the flat parameter vector.
///
/// Layer `l` owns a `4H x (in_l + H)` row-major weight matrix acting on
/// `[x; h_prev]` and a `4H` bias, with gate rows ordered input, forget,
/// cell, output. The head is `O x H` plus an `O` bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    layers: Vec<LayerLayout>,
    hidden: usize,
    out_dim: usize,
    head_weights: usize,
    head_bias: usize,
    len: usize,
}

impl Layout {
    pub fn new(config: &NetworkConfig) -> Self {
        let h = config.hidden_dim;
        let mut offset = 0;
        let layers = (0..config.n_layers)
            .map(|l| {
                let in_dim = if l == 0 { config.input_dim } else { h };
                let weights = offset;
                offset += 4 * h * (in_dim + h);
                let bias = offset;
                offset += 4 * h;
                LayerLayout { weights, bias, in_dim }
            })
            .collect();
        let out_dim = config.output_dim();
        let head_weights = offset;
        let head_bias = head_weights + out_dim * h;
        let len = head_bias + out_dim;
        Self { layers, hidden: h, out_dim, head_weights, head_bias, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Input width of layer `l`.
    pub fn layer_input_dim(&self, l: usize) -> usize {
        self.layers[l].in_dim
    }

    pub fn layer_weights(&self, l: usize) -> Range<usize> {
        let layer = self.layers[l];
        layer.weights..layer.bias
    }

    pub fn layer_bias(&self, l: usize) -> Range<usize> {
        let b = self.layers[l].bias;
        b..b + 4 * self.hidden
    }

    /// Rows of gate `gate` (0 input, 1 forget, 2 cell, 3 output) in layer `l`'s bias.
    pub fn gate_bias(&self, l: usize, gate: usize) -> Range<usize> {
        let b = self.layers[l].bias + gate * self.hidden;
        b..b + self.hidden
    }

    pub fn head_weights(&self) -> Range<usize> {
        self.head_weights..self.head_bias
    }

    pub fn head_bias(&self) -> Range<usize> {
        self.head_bias..self.len
    }
}

/// Per-dimension affine map applied to continuous features before they
/// reach the network; predictions are mapped back.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut n = 0usize;
        let mut sum = alloc::vec![0.0; dim];
        let mut sq = alloc::vec![0.0; dim];
        for r in rows {
            n += 1;
            for d in 0..dim {
                sum[d] += r[d];
                sq[d] += r[d] * r[d];
            }
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var > 1e-12 { math::sqrt(var) } else { 1.0 }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mean.iter().zip(&self.scale)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(self.mean.iter().zip(&self.scale)).map(|(v, (m, s))| v * s + m).collect()
    }
}

/// Hidden and cell state of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LstmState {
    pub fn zeros(n_layers: usize, hidden: usize) -> Self {
        Self {
            h: alloc::vec![alloc::vec![0.0; hidden]; n_layers],
            c: alloc::vec![alloc::vec![0.0; hidden]; n_layers],
        }
    }
}

/// Inverted-dropout multipliers (`0` or `1/(1-p)`) for every step and
/// layer output.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    // [step][layer][unit]
    masks: Vec<Vec<Vec<f64>>>,
}

impl DropoutMasks {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, steps: usize, n_layers: usize, hidden: usize, p: f64) -> Self {
        let keep = 1.0 / (1.0 - p);
        let masks = (0..steps)
            .map(|_| {
                (0..n_layers)
                    .map(|_| (0..hidden).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect())
                    .collect()
            })
            .collect();
        Self { masks }
    }

    pub fn from_raw(masks: Vec<Vec<Vec<f64>>>) -> Self {
        Self { masks }
    }

    pub(crate) fn get(&self, step: usize, layer: usize) -> &[f64] {
        &self.masks[step][layer]
    }

    pub fn steps(&self) -> usize {
        self.masks.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetwork {
    config: NetworkConfig,
    layout: Layout,
    params: Vec<f64>,
    /// RMSProp running mean of squared gradients, same layout as `params`.
    cache: Vec<f64>,
    normalizer: Option<Normalizer>,
}

/// Recorded activations of one layer at one step.
#[derive(Debug, Clone, Default)]
pub(crate) struct CellTrace {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gates `[i, f, g, o]`.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct StepTrace {
    pub cells: Vec<CellTrace>,
    /// Input to the head (top layer output after dropout).
    pub head_in: Vec<f64>,
}

/// Uniform weights in `[-1/sqrt(H), 1/sqrt(H)]`, zero biases except the
/// forget gate at 1.
pub fn init_network(config: &NetworkConfig, seed: u64) -> Result<LstmNetwork> {
    config.validate()?;
    let layout = Layout::new(config);
    let mut params = alloc::vec![0.0; layout.len()];
    let s = 1.0 / math::sqrt(config.hidden_dim as f64);
    let mut rng = seeded(sub_seed(seed, stream::NET_INIT));
    for l in 0..layout.n_layers() {
        for p in &mut params[layout.layer_weights(l)] {
            *p = rng.random_range(-s..=s);
        }
        for p in &mut params[layout.gate_bias(l, 1)] {
            *p = 1.0;
        }
    }
    for p in &mut params[layout.head_weights()] {
        *p = rng.random_range(-s..=s);
    }
    let cache = alloc::vec![0.0; layout.len()];
    Ok(LstmNetwork { config: config.clone(), layout, params, cache, normalizer: None })
}

impl LstmNetwork {
    /// Rebuild from a stored configuration and flat parameter list.
    pub fn from_parts(config: NetworkConfig, params: Vec<f64>, normalizer: Option<Normalizer>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.len() {
            return Err(Error::DimensionMismatch { expected: layout.len(), got: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        if let Some(n) = &normalizer {
            if n.mean.len() != config.input_dim || n.scale.len() != config.input_dim {
                return Err(Error::DimensionMismatch { expected: config.input_dim, got: n.mean.len() });
            }
        }
        let cache = alloc::vec![0.0; layout.len()];
        Ok(Self { config, layout, params, cache, normalizer })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn optimizer_cache(&self) -> &[f64] {
        &self.cache
    }

    pub fn normalizer(&self) -> Option<&Normalizer> {
        self.normalizer.as_ref()
    }

    pub fn set_normalizer(&mut self, normalizer: Option<Normalizer>) {
        self.normalizer = normalizer;
    }

    pub(crate) fn params_and_cache_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.params, &mut self.cache)
    }

    pub fn zero_state(&self) -> LstmState {
        LstmState::zeros(self.layout.n_layers(), self.config.hidden_dim)
    }

    /// Eval-mode pass from a zero state. Row `t` of the result predicts
    /// step `t + 1`: a distribution for categorical models, a feature
    /// vector (in the network's own, possibly standardized, space) for
    /// continuous ones.
    pub fn forward(&self, inputs: &Matrix) -> Result<Matrix> {
        let mut state = self.zero_state();
        self.run(inputs, &mut state, None, None)
    }

    /// Train-mode pass: fresh inverted-dropout masks on every layer output.
    pub fn forward_train<R: Rng + ?Sized>(&self, inputs: &Matrix, rng: &mut R) -> Result<Matrix> {
        let masks = DropoutMasks::sample(
            rng,
            inputs.rows(),
            self.layout.n_layers(),
            self.config.hidden_dim,
            self.config.dropout_p,
        );
        let mut state = self.zero_state();
        self.run(inputs, &mut state, Some(&masks), None)
    }

    /// Core recurrence. Advances `state`, optionally recording a trace for
    /// backpropagation.
    pub(crate) fn run(
        &self,
        inputs: &Matrix,
        state: &mut LstmState,
        masks: Option<&DropoutMasks>,
        mut trace: Option<&mut Vec<StepTrace>>,
    ) -> Result<Matrix> {
        if inputs.cols() != self.config.input_dim && inputs.rows() > 0 {
            return Err(Error::DimensionMismatch { expected: self.config.input_dim, got: inputs.cols() });
        }
        if let Some(m) = masks {
            if m.steps() < inputs.rows() {
                return Err(Error::DimensionMismatch { expected: inputs.rows(), got: m.steps() });
            }
        }
        let h = self.config.hidden_dim;
        let n_layers = self.layout.n_layers();
        let out_dim = self.config.output_dim();
        let mut out = Matrix::zeros(inputs.rows(), out_dim);
        let mut gates = alloc::vec![0.0; 4 * h];
        for t in 0..inputs.rows() {
            let mut x: Vec<f64> = inputs.row(t).to_vec();
            let mut step = StepTrace::default();
            for l in 0..n_layers {
                let w = &self.params[self.layout.layer_weights(l)];
                let b = &self.params[self.layout.layer_bias(l)];
                let in_dim = x.len();
                let cols = in_dim + h;
                let (h_prev, c_prev) = (&state.h[l], &state.c[l]);
                for r in 0..4 * h {
                    let row = &w[r * cols..(r + 1) * cols];
                    let mut z = b[r];
                    for j in 0..in_dim {
                        z += row[j] * x[j];
                    }
                    for j in 0..h {
                        z += row[in_dim + j] * h_prev[j];
                    }
                    gates[r] = if (2 * h..3 * h).contains(&r) { math::tanh(z) } else { math::sigmoid(z) };
                }
                let mut c_new = alloc::vec![0.0; h];
                let mut tanh_c = alloc::vec![0.0; h];
                let mut h_new = alloc::vec![0.0; h];
                for j in 0..h {
                    let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                    c_new[j] = f * c_prev[j] + i * g;
                    tanh_c[j] = math::tanh(c_new[j]);
                    h_new[j] = o * tanh_c[j];
                }
                if trace.is_some() {
                    step.cells.push(CellTrace {
                        x: x.clone(),
                        h_prev: h_prev.clone(),
                        c_prev: c_prev.clone(),
                        gates: gates.clone(),
                        tanh_c: tanh_c.clone(),
                    });
                }
                let mut y = h_new.clone();
                if let Some(m) = masks {
                    for (v, k) in y.iter_mut().zip(m.get(t, l)) {
                        *v *= k;
                    }
                }
                state.h[l] = h_new;
                state.c[l] = c_new;
                x = y;
            }
            let hw = &self.params[self.layout.head_weights()];
            let hb = &self.params[self.layout.head_bias()];
            let row = out.row_mut(t);
            for (o, r) in row.iter_mut().enumerate() {
                *r = hb[o] + hw[o * h..(o + 1) * h].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            }
            if self.config.kind == PredictorKind::Categorical {
                softmax_in_place(row);
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence(alloc::format!("non-finite activation at step {t}")));
            }
            if let Some(tr) = trace.as_deref_mut() {
                step.head_in = x;
                tr.push(step);
            }
        }
        Ok(out)
    }
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = math::exp(*x - max);
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_init_is_reproducible_and_shaped() {
        let cfg = NetworkConfig::categorical(8);
        let a = init_network(&cfg, 3).unwrap();
        let b = init_network(&cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params(), init_network(&cfg, 4).unwrap().params());
        let lay = a.layout();
        // per gate: 40 rows over [x (8); h (40)]
        assert_eq!(lay.layer_weights(0).len(), 4 * 40 * (8 + 40));
        assert_eq!(lay.layer_weights(1).len(), 4 * 40 * (40 + 40));
        assert_eq!(lay.head_weights().len(), 8 * 40);
        assert!(a.params()[lay.gate_bias(0, 1)].iter().all(|&b| b == 1.0));
        assert!(a.params()[lay.gate_bias(1, 0)].iter().all(|&b| b == 0.0));
        let s = 1.0 / 40f64.sqrt();
        assert!(a.params()[lay.layer_weights(0)].iter().all(|w| w.abs() <= s));
    }

    #[test]
    fn zero_parameters_give_zero_state_and_uniform_output() {
        let cfg = NetworkConfig::categorical(8);
        let mut net = init_network(&cfg, 0).unwrap();
        net.params_mut().fill(0.0);
        let inputs = Matrix::from_rows(8, (0..5).map(|t| {
            let mut v = [0.0; 8];
            v[t % 8] = 1.0;
            v
        }))
        .unwrap();
        let mut state = net.zero_state();
        let out = net.run(&inputs, &mut state, None, None).unwrap();
        assert!(state.h.iter().flatten().all(|&v| v == 0.0));
        for row in out.iter_rows() {
            assert!(row.iter().all(|&p| p == 0.125));
        }
    }

    #[test]
    fn eval_is_deterministic_and_softmax_normalized() {
        let net = init_network(&NetworkConfig::categorical(8), 1).unwrap();
        let inputs = Matrix::from_rows(8, (0..7).map(|t| {
            let mut v = [0.0; 8];
            v[(t * 3) % 8] = 1.0;
            v
        }))
        .unwrap();
        let a = net.forward(&inputs).unwrap();
        assert_eq!(a, net.forward(&inputs).unwrap());
        for row in a.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let mut rng = seeded(5);
        let d = net.forward_train(&inputs, &mut rng).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn single_unit_matches_hand_arithmetic() {
        let mut cfg = NetworkConfig::continuous(1);
        cfg.hidden_dim = 1;
        cfg.n_layers = 1;
        // layer: rows i, f, g, o over [x, h]; biases; head w, b
        let (wi, ui, bi) = (0.5, -0.3, 0.1);
        let (wf, uf, bf) = (-0.2, 0.4, 1.0);
        let (wg, ug, bg) = (0.9, 0.2, -0.1);
        let (wo, uo, bo) = (0.3, -0.6, 0.05);
        let params = alloc::vec![wi, ui, wf, uf, wg, ug, wo, uo, bi, bf, bg, bo, 1.5, -0.25];
        let net = LstmNetwork::from_parts(cfg, params, None).unwrap();
        let xs = [1.0, -0.5, 2.0];
        let out = net.forward(&Matrix::from_rows(1, xs.iter().map(|x| [*x])).unwrap()).unwrap();
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let (mut h, mut c) = (0.0f64, 0.0f64);
        for (t, x) in xs.iter().enumerate() {
            let i = sig(wi * x + ui * h + bi);
            let f = sig(wf * x + uf * h + bf);
            let g = (wg * x + ug * h + bg).tanh();
            let o = sig(wo * x + uo * h + bo);
            c = f * c + i * g;
            h = o * c.tanh();
            assert!((out.row(t)[0] - (1.5 * h - 0.25)).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = init_network(&NetworkConfig::categorical(8), 0).unwrap();
        let bad = Matrix::zeros(3, 5);
        assert_eq!(net.forward(&bad).unwrap_err(), Error::DimensionMismatch { expected: 8, got: 5 });
        assert!(LstmNetwork::from_parts(NetworkConfig::categorical(8), alloc::vec![0.0; 3], None).is_err());
    }

    #[test]
    fn normalizer_round_trips() {
        let rows = [[1.0, 10.0], [3.0, 10.0], [5.0, 10.0]];
        let n = Normalizer::fit(rows.iter().map(|r| r.as_slice()), 2);
        assert_eq!(n.mean, [3.0, 10.0]);
        assert_eq!(n.scale[1], 1.0);
        let z = n.forward(&[5.0, 11.0]);
        assert!((n.inverse(&z)[0] - 5.0).abs() < 1e-12 && (n.inverse(&z)[1] - 11.0).abs() < 1e-12);
    }
}
