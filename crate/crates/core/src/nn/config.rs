use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    /// Softmax over symbols, cross-entropy loss.
    Categorical,
    /// Linear output, mean squared error.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub kind: PredictorKind,
    /// Input and output width (alphabet size or feature dimension).
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub dropout_p: f64,
    /// Probability of dropping the loss of a step that repeats the previous symbol.
    pub skip_prob: f64,
    pub bptt_len: usize,
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    pub seed: u64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Standardize continuous features per dimension before training.
    pub standardize: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::categorical(8)
    }
}

impl NetworkConfig {
    pub fn categorical(n_symbols: usize) -> Self {
        Self {
            kind: PredictorKind::Categorical,
            input_dim: n_symbols,
            hidden_dim: 40,
            n_layers: 2,
            dropout_p: 0.2,
            skip_prob: 0.8,
            bptt_len: 64,
            lr: 1e-3,
            rho: 0.9,
            eps: 1e-8,
            seed: 0,
            max_epochs: 50,
            patience: 5,
            standardize: false,
        }
    }

    pub fn continuous(dim: usize) -> Self {
        Self {
            kind: PredictorKind::Continuous,
            input_dim: dim,
            hidden_dim: 20,
            skip_prob: 0.0,
            ..Self::categorical(dim)
        }
    }

    pub fn output_dim(&self) -> usize {
        self.input_dim
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.input_dim == 0 || self.hidden_dim == 0 || self.n_layers == 0 {
            return bad("input_dim, hidden_dim and n_layers must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout_p must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.skip_prob) {
            return bad("skip_prob must lie in [0, 1]");
        }
        if self.bptt_len == 0 {
            return bad("bptt_len must be positive");
        }
        if !(self.lr > 0.0 && (0.0..1.0).contains(&self.rho) && self.eps > 0.0) {
            return bad("RMSProp needs lr > 0, rho in [0, 1), eps > 0");
        }
        Ok(())
    }
}
