use alloc::vec::Vec;

use super::config::PredictorKind;
use super::network::{DropoutMasks, LstmNetwork, LstmState, StepTrace};
use super::{loss_categorical, loss_mse};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Prediction targets for a chunk, one per input step.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Symbols(&'a [usize]),
    Vectors(&'a Matrix),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Symbols(s) => s.len(),
            Targets::Vectors(m) => m.rows(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BpttOutput {
    /// Gradient of the summed masked loss, laid out like the parameters.
    pub grads: Vec<f64>,
    /// Summed loss over steps whose mask is set.
    pub loss: f64,
    pub active: usize,
    /// State after the last step, to seed the next chunk.
    pub final_state: LstmState,
}

impl LstmNetwork {
    /// Backpropagation through time over one chunk.
    ///
    /// The chunk starts from `init` without gradient flowing into it. Steps
    /// whose mask is false still advance the state but add no loss. With
    /// `dropout`, the given masks multiply every layer output.
    pub fn bptt_gradients(
        &self,
        inputs: &Matrix,
        targets: Targets<'_>,
        mask: &[bool],
        init: &LstmState,
        dropout: Option<&DropoutMasks>,
    ) -> Result<BpttOutput> {
        let steps = inputs.rows();
        if steps > self.config().bptt_len {
            return Err(Error::InvalidConfig(alloc::format!(
                "chunk of {steps} steps exceeds bptt_len {}",
                self.config().bptt_len
            )));
        }
        if targets.len() != steps || mask.len() != steps {
            return Err(Error::DimensionMismatch { expected: steps, got: targets.len().min(mask.len()) });
        }
        let kind = self.config().kind;
        match (kind, &targets) {
            (PredictorKind::Categorical, Targets::Symbols(s)) => {
                if let Some(&bad) = s.iter().find(|&&x| x >= self.config().output_dim()) {
                    return Err(Error::SymbolOutOfRange { symbol: bad, n_symbols: self.config().output_dim() });
                }
            }
            (PredictorKind::Continuous, Targets::Vectors(m)) => {
                if m.cols() != self.config().output_dim() && steps > 0 {
                    return Err(Error::DimensionMismatch { expected: self.config().output_dim(), got: m.cols() });
                }
            }
            _ => return Err(Error::InvalidConfig("targets do not match the predictor kind".into())),
        }

        let mut state = init.clone();
        let mut trace: Vec<StepTrace> = Vec::with_capacity(steps);
        let outputs = self.run(inputs, &mut state, dropout, Some(&mut trace))?;

        let layout = self.layout();
        let params = self.params();
        let h = self.config().hidden_dim;
        let out_dim = self.config().output_dim();
        let n_layers = layout.n_layers();
        let mut grads = alloc::vec![0.0; layout.len()];
        let mut loss = 0.0;
        let mut active = 0;

        let mut dh_next = alloc::vec![alloc::vec![0.0; h]; n_layers];
        let mut dc_next = alloc::vec![alloc::vec![0.0; h]; n_layers];
        let mut dy = alloc::vec![0.0; out_dim];
        let mut dz = alloc::vec![0.0; 4 * h];
        let head_w = layout.head_weights();
        let head_b = layout.head_bias();

        for t in (0..steps).rev() {
            let step = &trace[t];
            // gradient w.r.t. the (dropped-out) output of the layer being processed
            let mut d_out = alloc::vec![0.0; h];
            if mask[t] {
                active += 1;
                let y = outputs.row(t);
                match targets {
                    Targets::Symbols(s) => {
                        loss += loss_categorical(y, s[t]);
                        dy.copy_from_slice(y);
                        dy[s[t]] -= 1.0;
                    }
                    Targets::Vectors(m) => {
                        let target = m.row(t);
                        loss += loss_mse(y, target);
                        let scale = 2.0 / out_dim as f64;
                        for (d, (p, q)) in dy.iter_mut().zip(y.iter().zip(target)) {
                            *d = scale * (p - q);
                        }
                    }
                }
                for o in 0..out_dim {
                    grads[head_b.start + o] += dy[o];
                    let w_row = &params[head_w.start + o * h..head_w.start + (o + 1) * h];
                    let g_row = &mut grads[head_w.start + o * h..head_w.start + (o + 1) * h];
                    for j in 0..h {
                        g_row[j] += dy[o] * step.head_in[j];
                        d_out[j] += w_row[j] * dy[o];
                    }
                }
            }

            for l in (0..n_layers).rev() {
                let cell = &step.cells[l];
                let in_dim = cell.x.len();
                let cols = in_dim + h;
                let mut dh = d_out;
                if let Some(m) = dropout {
                    for (d, k) in dh.iter_mut().zip(m.get(t, l)) {
                        *d *= k;
                    }
                }
                for (d, n) in dh.iter_mut().zip(&dh_next[l]) {
                    *d += n;
                }
                for j in 0..h {
                    let (i, f, g, o) =
                        (cell.gates[j], cell.gates[h + j], cell.gates[2 * h + j], cell.gates[3 * h + j]);
                    let tc = cell.tanh_c[j];
                    let dc = dh[j] * o * (1.0 - tc * tc) + dc_next[l][j];
                    dz[j] = dc * g * i * (1.0 - i);
                    dz[h + j] = dc * cell.c_prev[j] * f * (1.0 - f);
                    dz[2 * h + j] = dc * i * (1.0 - g * g);
                    dz[3 * h + j] = dh[j] * tc * o * (1.0 - o);
                    dc_next[l][j] = dc * f;
                }
                let w_range = layout.layer_weights(l);
                let b_range = layout.layer_bias(l);
                let w = &params[w_range.clone()];
                let mut dx = alloc::vec![0.0; in_dim];
                let mut dh_prev = alloc::vec![0.0; h];
                {
                    let gw = &mut grads[w_range];
                    for r in 0..4 * h {
                        let d = dz[r];
                        if d == 0.0 {
                            continue;
                        }
                        let g_row = &mut gw[r * cols..(r + 1) * cols];
                        let w_row = &w[r * cols..(r + 1) * cols];
                        for j in 0..in_dim {
                            g_row[j] += d * cell.x[j];
                            dx[j] += w_row[j] * d;
                        }
                        for j in 0..h {
                            g_row[in_dim + j] += d * cell.h_prev[j];
                            dh_prev[j] += w_row[in_dim + j] * d;
                        }
                    }
                }
                for (g, d) in grads[b_range].iter_mut().zip(&dz) {
                    *g += d;
                }
                dh_next[l] = dh_prev;
                d_out = dx;
            }
        }

        if grads.iter().any(|g| !g.is_finite()) || !loss.is_finite() {
            return Err(Error::Divergence("non-finite gradient or loss".into()));
        }
        Ok(BpttOutput { grads, loss, active, final_state: state })
    }
}
