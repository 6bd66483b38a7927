use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::backprop::Targets;
use super::config::{NetworkConfig, PredictorKind};
use super::network::{init_network, DropoutMasks, LstmNetwork, Normalizer};
use super::{loss_categorical, loss_mse};
use crate::audio::FrameSequence;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quantizer::CategoricalSequence;
use crate::rng::{seeded, stream, sub_seed};
use crate::segment::ErrorSignal;

/// Which steps contribute loss: every symbol change, and a repeat of the
/// previous symbol with probability `1 - skip_prob`. Step 0 has no
/// predecessor and is flagged true.
pub fn skip_mask_with<R: Rng + ?Sized>(symbols: &[usize], skip_prob: f64, rng: &mut R) -> Vec<bool> {
    symbols
        .iter()
        .enumerate()
        .map(|(t, &s)| t == 0 || s != symbols[t - 1] || rng.random::<f64>() >= skip_prob)
        .collect()
}

pub fn make_skip_mask(sequence: &CategoricalSequence, skip_prob: f64, seed: u64) -> Vec<bool> {
    skip_mask_with(sequence.symbols(), skip_prob, &mut seeded(seed))
}

#[derive(Debug, Clone, Copy)]
pub enum TrainingData<'a> {
    Categorical(&'a [CategoricalSequence]),
    Continuous(&'a [FrameSequence]),
}

#[derive(Debug, Clone, Copy)]
pub enum SequenceRef<'a> {
    Categorical(&'a CategoricalSequence),
    Continuous(&'a FrameSequence),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss over steps that were backpropagated.
    pub train_loss: f64,
    /// Mean loss over every validation step, eval mode.
    pub val_loss: f64,
    /// Fraction of training steps whose loss was backpropagated.
    pub backprop_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub initial_train_loss: f64,
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned (0 = initialization).
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_epoch: usize,
}

// One utterance as (input, target) pairs in network space.
struct Example {
    inputs: Matrix,
    symbols: Vec<usize>,
    vectors: Option<Matrix>,
}

impl Example {
    fn steps(&self) -> usize {
        self.inputs.rows()
    }
}

fn categorical_example(seq: &CategoricalSequence) -> Example {
    let n = seq.len().saturating_sub(1);
    let one_hot = seq.one_hot_matrix();
    Example { inputs: one_hot.slice_rows(0, n), symbols: seq.symbols().to_vec(), vectors: None }
}

fn continuous_example(seq: &FrameSequence, norm: Option<&Normalizer>) -> Result<Example> {
    let frames = match norm {
        Some(n) => Matrix::from_rows(seq.dim(), seq.frames().iter_rows().map(|r| n.forward(r)))?,
        None => seq.frames().clone(),
    };
    let n = frames.rows().saturating_sub(1);
    Ok(Example { inputs: frames.slice_rows(0, n), symbols: Vec::new(), vectors: Some(frames) })
}

fn check_data(data: TrainingData<'_>, config: &NetworkConfig) -> Result<()> {
    match (data, config.kind) {
        (TrainingData::Categorical(seqs), PredictorKind::Categorical) => {
            if let Some(s) = seqs.iter().find(|s| s.n_symbols() != config.input_dim) {
                return Err(Error::DimensionMismatch { expected: config.input_dim, got: s.n_symbols() });
            }
        }
        (TrainingData::Continuous(seqs), PredictorKind::Continuous) => {
            if let Some(s) = seqs.iter().find(|s| !s.is_empty() && s.dim() != config.input_dim) {
                return Err(Error::DimensionMismatch { expected: config.input_dim, got: s.dim() });
            }
        }
        _ => return Err(Error::InvalidConfig("training data does not match the predictor kind".into())),
    }
    Ok(())
}

fn examples(data: TrainingData<'_>, norm: Option<&Normalizer>) -> Result<Vec<Example>> {
    let out: Vec<Example> = match data {
        TrainingData::Categorical(seqs) => seqs.iter().map(categorical_example).collect(),
        TrainingData::Continuous(seqs) => {
            seqs.iter().map(|s| continuous_example(s, norm)).collect::<Result<_>>()?
        }
    };
    Ok(out.into_iter().filter(|e| e.steps() > 0).collect())
}

impl LstmNetwork {
    fn example_loss(&self, ex: &Example) -> Result<(f64, usize)> {
        let out = self.forward(&ex.inputs)?;
        let mut sum = 0.0;
        for t in 0..ex.steps() {
            sum += match &ex.vectors {
                None => loss_categorical(out.row(t), ex.symbols[t + 1]),
                Some(v) => loss_mse(out.row(t), v.row(t + 1)),
            };
        }
        Ok((sum, ex.steps()))
    }
}

fn mean_loss(net: &LstmNetwork, data: &[Example]) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for ex in data {
        let (s, k) = net.example_loss(ex)?;
        sum += s;
        n += k;
    }
    if !sum.is_finite() {
        return Err(Error::Divergence("non-finite evaluation loss".into()));
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Train with chunked BPTT and RMSProp, early-stopping on validation loss.
/// Returns the parameters with the best validation loss seen.
pub fn train_predictor(
    train: TrainingData<'_>,
    val: TrainingData<'_>,
    config: &NetworkConfig,
) -> Result<(LstmNetwork, TrainingReport)> {
    config.validate()?;
    check_data(train, config)?;
    check_data(val, config)?;

    let normalizer = match (train, config.standardize) {
        (TrainingData::Continuous(seqs), true) => Some(Normalizer::fit(
            seqs.iter().flat_map(|s| s.frames().iter_rows()),
            config.input_dim,
        )),
        _ => None,
    };
    let train_ex = examples(train, normalizer.as_ref())?;
    let val_ex = examples(val, normalizer.as_ref())?;
    if train_ex.is_empty() || val_ex.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut net = init_network(config, config.seed)?;
    net.set_normalizer(normalizer);
    let mut rng = seeded(sub_seed(config.seed, stream::NET_TRAIN));

    let initial_train_loss = mean_loss(&net, &train_ex)?;
    let initial_val_loss = mean_loss(&net, &val_ex)?;
    let mut best = net.clone();
    let mut best_val = initial_val_loss;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train_ex.len()).collect();
    let n_layers = config.n_layers;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut active, mut total) = (0.0, 0usize, 0usize);
        for &idx in &order {
            let ex = &train_ex[idx];
            let mask: Vec<bool> = match config.kind {
                PredictorKind::Categorical => skip_mask_with(&ex.symbols, config.skip_prob, &mut rng)[1..].to_vec(),
                PredictorKind::Continuous => alloc::vec![true; ex.steps()],
            };
            let mut state = net.zero_state();
            let mut start = 0;
            while start < ex.steps() {
                let end = (start + config.bptt_len).min(ex.steps());
                let inputs = ex.inputs.slice_rows(start, end);
                let dropout = (config.dropout_p > 0.0).then(|| {
                    DropoutMasks::sample(&mut rng, end - start, n_layers, config.hidden_dim, config.dropout_p)
                });
                let vec_targets = ex.vectors.as_ref().map(|v| v.slice_rows(start + 1, end + 1));
                let targets = match &vec_targets {
                    Some(m) => Targets::Vectors(m),
                    None => Targets::Symbols(&ex.symbols[start + 1..end + 1]),
                };
                let out = net.bptt_gradients(&inputs, targets, &mask[start..end], &state, dropout.as_ref())?;
                total += end - start;
                if out.active > 0 {
                    let scale = 1.0 / out.active as f64;
                    let grads: Vec<f64> = out.grads.iter().map(|g| g * scale).collect();
                    net.rmsprop_step(&grads, config.lr, config.rho, config.eps)?;
                    loss_sum += out.loss;
                    active += out.active;
                }
                state = out.final_state;
                start = end;
            }
        }
        let train_loss = if active == 0 { 0.0 } else { loss_sum / active as f64 };
        let val_loss = mean_loss(&net, &val_ex)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence(alloc::format!("non-finite loss in epoch {epoch}")));
        }
        epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            backprop_fraction: if total == 0 { 0.0 } else { active as f64 / total as f64 },
        });
        if val_loss < best_val {
            best_val = val_loss;
            best = net.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    let stopped_epoch = epochs.last().map_or(0, |e| e.epoch);
    let report = TrainingReport {
        initial_train_loss,
        initial_val_loss,
        epochs,
        best_epoch,
        best_val_loss: best_val,
        stopped_epoch,
    };
    Ok((best, report))
}

/// Frame-level prediction error: `E(t)` scores the prediction made after
/// reading `x_0..x_{t-1}` against `x_t`; `E(0) = 0`. Continuous models are
/// scored in the original feature space.
pub fn nn_error_signal(network: &LstmNetwork, sequence: SequenceRef<'_>) -> Result<ErrorSignal> {
    let cfg = network.config();
    match (sequence, cfg.kind) {
        (SequenceRef::Categorical(seq), PredictorKind::Categorical) => {
            if seq.n_symbols() != cfg.input_dim {
                return Err(Error::DimensionMismatch { expected: cfg.input_dim, got: seq.n_symbols() });
            }
            let ex = categorical_example(seq);
            let out = network.forward(&ex.inputs)?;
            let mut values = alloc::vec![0.0; seq.len()];
            for t in 1..seq.len() {
                values[t] = loss_categorical(out.row(t - 1), seq.symbols()[t]);
            }
            ErrorSignal::new(seq.utterance_id(), values, seq.hop_ms())
        }
        (SequenceRef::Continuous(seq), PredictorKind::Continuous) => {
            if seq.dim() != cfg.input_dim && !seq.is_empty() {
                return Err(Error::DimensionMismatch { expected: cfg.input_dim, got: seq.dim() });
            }
            let ex = continuous_example(seq, network.normalizer())?;
            let out = network.forward(&ex.inputs)?;
            let mut values = alloc::vec![0.0; seq.len()];
            for t in 1..seq.len() {
                let pred = match network.normalizer() {
                    Some(n) => n.inverse(out.row(t - 1)),
                    None => out.row(t - 1).to_vec(),
                };
                values[t] = loss_mse(&pred, seq.frame(t));
            }
            ErrorSignal::new(seq.utterance_id(), values, seq.hop_ms())
        }
        _ => Err(Error::InvalidConfig("sequence kind does not match the network".into())),
    }
}
