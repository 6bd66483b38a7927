//! Lag-averaged pseudo-Markov predictor.
//!
//! A `K`-order chain is replaced by `K` first-order tables, one per lag:
//! `table[i][a][b] = p(x_t = b | x_{t-i-1} = a)`. The frame error is
//! `-ln(sum_i p(x_t | x_{t-i}))`, i.e. the log of the lag *sum*; it differs
//! from the log of the lag *mean* by the constant `ln K`, which does not
//! move any peak.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::quantizer::CategoricalSequence;
use crate::segment::ErrorSignal;

pub const DEFAULT_ORDER: usize = 6;
pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    order: usize,
    alpha: f64,
    n_symbols: usize,
    // order x n_symbols x n_symbols, [lag][context][next]
    pair_counts: Vec<u64>,
    tables: Vec<f64>,
}

impl MarkovModel {
    /// Build from row-normalized tables (`order * n * n` values). Counts are
    /// not known for such a model and read back as zero.
    pub fn from_tables(order: usize, alpha: f64, n_symbols: usize, tables: Vec<f64>) -> Result<Self> {
        if order == 0 || n_symbols == 0 {
            return Err(Error::InvalidModel("order and alphabet size must be positive".into()));
        }
        if tables.len() != order * n_symbols * n_symbols {
            return Err(Error::DimensionMismatch {
                expected: order * n_symbols * n_symbols,
                got: tables.len(),
            });
        }
        for row in tables.chunks_exact(n_symbols) {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel("table row is not a positive distribution".into()));
            }
        }
        Ok(Self {
            order,
            alpha,
            n_symbols,
            pair_counts: alloc::vec![0; order * n_symbols * n_symbols],
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    /// `p(x_t = next | x_{t-lag} = context)`, `lag` in `1..=order`.
    pub fn prob(&self, lag: usize, context: usize, next: usize) -> f64 {
        let n = self.n_symbols;
        self.tables[((lag - 1) * n + context) * n + next]
    }

    /// Row-normalized table for `lag` (`n_symbols^2` values, row = context).
    pub fn table(&self, lag: usize) -> &[f64] {
        let nn = self.n_symbols * self.n_symbols;
        &self.tables[(lag - 1) * nn..lag * nn]
    }

    pub fn pair_count(&self, lag: usize, context: usize, next: usize) -> u64 {
        let n = self.n_symbols;
        self.pair_counts[((lag - 1) * n + context) * n + next]
    }

    pub fn context_count(&self, lag: usize, context: usize) -> u64 {
        let n = self.n_symbols;
        let start = ((lag - 1) * n + context) * n;
        self.pair_counts[start..start + n].iter().sum()
    }

    pub fn min_prob(&self) -> f64 {
        self.tables.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Per-frame error; the first `order` frames are 0.
    pub fn error_signal(&self, sequence: &CategoricalSequence) -> Result<ErrorSignal> {
        if sequence.n_symbols() != self.n_symbols {
            return Err(Error::DimensionMismatch { expected: self.n_symbols, got: sequence.n_symbols() });
        }
        let x = sequence.symbols();
        let values = (0..x.len())
            .map(|t| {
                if t < self.order {
                    0.0
                } else {
                    let s: f64 = (1..=self.order).map(|i| self.prob(i, x[t - i], x[t])).sum();
                    -math::ln(s)
                }
            })
            .collect();
        ErrorSignal::new(sequence.utterance_id(), values, sequence.hop_ms())
    }
}

/// Count lag pairs within each utterance and normalize with additive
/// smoothing: `(count + alpha) / (context_total + alpha * n_symbols)`.
pub fn fit_markov(sequences: &[CategoricalSequence], order: usize, alpha: f64) -> Result<MarkovModel> {
    if order == 0 {
        return Err(Error::InvalidConfig("Markov order must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig("smoothing alpha must be positive".into()));
    }
    let usable: Vec<&CategoricalSequence> = sequences.iter().filter(|s| s.len() > order).collect();
    let Some(first) = usable.first() else {
        return Err(Error::NoUsableSequences { order });
    };
    let n = first.n_symbols();
    if let Some(s) = usable.iter().find(|s| s.n_symbols() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: s.n_symbols() });
    }

    let mut counts = alloc::vec![0u64; order * n * n];
    for seq in &usable {
        let x = seq.symbols();
        for lag in 1..=order {
            let base = (lag - 1) * n * n;
            for t in lag..x.len() {
                counts[base + x[t - lag] * n + x[t]] += 1;
            }
        }
    }
    let mut tables = alloc::vec![0.0; order * n * n];
    for (row_counts, row) in counts.chunks_exact(n).zip(tables.chunks_exact_mut(n)) {
        let total: u64 = row_counts.iter().sum();
        let denom = total as f64 + alpha * n as f64;
        for (p, &c) in row.iter_mut().zip(row_counts) {
            *p = (c as f64 + alpha) / denom;
        }
    }
    Ok(MarkovModel { order, alpha, n_symbols: n, pair_counts: counts, tables })
}
