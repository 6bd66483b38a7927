//! Reference implementations used as test oracles. Each one is written from
//! the definition, directly and slowly, without sharing code with the crate.
#![allow(dead_code)]

use std::f64::consts::PI;

use blindseg_core::nn::{DropoutMasks, LstmNetwork, LstmState, NetworkConfig, PredictorKind, Targets};
use blindseg_core::{Matrix, PeakRule};
use rand::Rng;

pub const TIME_EPS: f64 = 1e-9;

/// MFCC by the textbook route: naive DFT, triangular mel filters, DCT-II.
pub struct ReferenceMfcc {
    pub sample_rate: f64,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_filters: usize,
    pub n_cepstra: usize,
    pub pre_emphasis: f64,
    pub floor: f64,
}

impl Default for ReferenceMfcc {
    fn default() -> Self {
        Self {
            sample_rate: 16000.0,
            window_ms: 25.0,
            hop_ms: 10.0,
            n_filters: 26,
            n_cepstra: 12,
            pre_emphasis: 0.97,
            floor: 1e-10,
        }
    }
}

impl ReferenceMfcc {
    pub fn compute(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let win = (self.window_ms * self.sample_rate / 1000.0).round() as usize;
        let hop = (self.hop_ms * self.sample_rate / 1000.0).round() as usize;
        let mut nfft = 1;
        while nfft < win {
            nfft *= 2;
        }
        let mut y = vec![0.0; x.len()];
        y[0] = x[0];
        for n in 1..x.len() {
            y[n] = x[n] - self.pre_emphasis * x[n - 1];
        }
        let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
        let inv_mel = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
        let top = mel(self.sample_rate / 2.0);
        let edge = |j: usize| inv_mel(top * j as f64 / (self.n_filters + 1) as f64);

        let mut out = Vec::new();
        let mut start = 0;
        while start + win <= x.len() {
            let frame: Vec<f64> = (0..win)
                .map(|n| y[start + n] * (0.54 - 0.46 * (2.0 * PI * n as f64 / (win - 1) as f64).cos()))
                .collect();
            let power: Vec<f64> = (0..=nfft / 2)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (n, v) in frame.iter().enumerate() {
                        let a = -2.0 * PI * (k * n) as f64 / nfft as f64;
                        re += v * a.cos();
                        im += v * a.sin();
                    }
                    (re * re + im * im) / nfft as f64
                })
                .collect();
            let log_energies: Vec<f64> = (0..self.n_filters)
                .map(|m| {
                    let (lo, mid, hi) = (edge(m), edge(m + 1), edge(m + 2));
                    let mut e = 0.0;
                    for (k, p) in power.iter().enumerate() {
                        let f = k as f64 * self.sample_rate / nfft as f64;
                        let w = if f > lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f < hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        };
                        e += w * p;
                    }
                    e.max(self.floor).ln()
                })
                .collect();
            let m = self.n_filters as f64;
            let mut row: Vec<f64> = (1..=self.n_cepstra)
                .map(|k| {
                    (2.0 / m).sqrt()
                        * log_energies
                            .iter()
                            .enumerate()
                            .map(|(n, l)| l * (PI * k as f64 * (n as f64 + 0.5) / m).cos())
                            .sum::<f64>()
                })
                .collect();
            row.push(frame.iter().map(|v| v * v).sum::<f64>().max(self.floor).ln());
            out.push(row);
            start += hop;
        }
        out
    }
}

/// Peak picking by explicit enumeration: list every local maximum, then for
/// each one take the minimum of the slice back to the reference point.
pub fn brute_peaks(v: &[f64], delta: f64, rule: PeakRule) -> Vec<usize> {
    let n = v.len();
    let mut maxima = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if v[i - 1] >= v[i] {
            continue;
        }
        let mut j = i;
        while j + 1 < n && v[j + 1] == v[i] {
            j += 1;
        }
        if j + 1 < n && v[j + 1] < v[i] {
            maxima.push(i);
        }
    }
    let mut out: Vec<usize> = Vec::new();
    let mut prev_max: Option<usize> = None;
    for &m in &maxima {
        let from = match rule {
            PeakRule::PreviousLocalMinimum => prev_max.unwrap_or(0),
            PeakRule::SinceLastBoundary => out.last().copied().unwrap_or(0),
        };
        let valley = v[from..=m].iter().cloned().fold(f64::INFINITY, f64::min);
        if v[m] - valley > delta {
            out.push(m);
        }
        prev_max = Some(m);
    }
    out
}

fn admissible_cropped(gold: &[f64], i: usize, h: f64, tol: f64) -> bool {
    if (h - gold[i]).abs() > tol + TIME_EPS {
        return false;
    }
    if i > 0 && h < 0.5 * (gold[i - 1] + gold[i]) {
        return false;
    }
    if i + 1 < gold.len() && h >= 0.5 * (gold[i] + gold[i + 1]) {
        return false;
    }
    true
}

/// Maximum one-to-one matching between gold and hypotheses where an edge
/// exists iff the hypothesis lies in the gold boundary's cropped window.
/// Exhaustive search over (gold index, used-hypothesis set).
pub fn brute_cropped_hits(gold: &[f64], hyp: &[f64], tol: f64) -> usize {
    assert!(hyp.len() <= 16);
    let mut memo = std::collections::HashMap::new();
    fn go(
        i: usize,
        used: u32,
        gold: &[f64],
        hyp: &[f64],
        tol: f64,
        memo: &mut std::collections::HashMap<(usize, u32), usize>,
    ) -> usize {
        if i == gold.len() {
            return 0;
        }
        if let Some(&r) = memo.get(&(i, used)) {
            return r;
        }
        let mut best = go(i + 1, used, gold, hyp, tol, memo);
        for (j, &h) in hyp.iter().enumerate() {
            if used & (1 << j) == 0 && admissible_cropped(gold, i, h, tol) {
                best = best.max(1 + go(i + 1, used | (1 << j), gold, hyp, tol, memo));
            }
        }
        memo.insert((i, used), best);
        best
    }
    go(0, 0, gold, hyp, tol, &mut memo)
}

/// Gold boundaries with any hypothesis within the full tolerance.
pub fn brute_overlapping_hits(gold: &[f64], hyp: &[f64], tol: f64) -> usize {
    gold.iter().filter(|g| hyp.iter().any(|h| (h - *g).abs() <= tol + TIME_EPS)).count()
}

/// Sorted distinct times on a 5 ms grid, at most `max` of them.
pub fn random_times<R: Rng>(rng: &mut R, max: usize) -> Vec<f64> {
    let n = rng.random_range(0..=max);
    let mut ticks: Vec<u32> = (0..n).map(|_| rng.random_range(0..80)).collect();
    ticks.sort_unstable();
    ticks.dedup();
    ticks.into_iter().map(|k| k as f64 * 0.005).collect()
}

pub fn brute_nearest(centroids: &Matrix, x: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for j in 0..centroids.rows() {
        let d: f64 = centroids.row(j).iter().zip(x).map(|(c, v)| (c - v).powi(2)).sum();
        if d < best.0 {
            best = (d, j);
        }
    }
    best.1
}

/// One finite-difference trial on a random small network. Returns the
/// largest relative error between analytic and numerical gradients.
pub fn gradient_check_trial(seed: u64, kind: PredictorKind) -> f64 {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let hidden = rng.random_range(1..=8);
    let layers = rng.random_range(1..=2);
    let dim = rng.random_range(2..=5);
    let steps = rng.random_range(1..=6);
    let mut cfg = match kind {
        PredictorKind::Categorical => NetworkConfig::categorical(dim),
        PredictorKind::Continuous => NetworkConfig::continuous(dim),
    };
    cfg.hidden_dim = hidden;
    cfg.n_layers = layers;
    cfg.seed = seed;
    let mut net = blindseg_core::nn::init_network(&cfg, seed).unwrap();
    for p in net.params_mut() {
        *p = rng.random_range(-1.0..1.0);
    }

    let inputs = Matrix::from_vec(steps, dim, (0..steps * dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .unwrap();
    let symbols: Vec<usize> = (0..steps).map(|_| rng.random_range(0..dim)).collect();
    let vectors =
        Matrix::from_vec(steps, dim, (0..steps * dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let targets = match kind {
        PredictorKind::Categorical => Targets::Symbols(&symbols),
        PredictorKind::Continuous => Targets::Vectors(&vectors),
    };
    let mut mask: Vec<bool> = (0..steps).map(|_| rng.random_bool(0.7)).collect();
    mask[steps - 1] = true;
    let mut init = LstmState::zeros(layers, hidden);
    for l in 0..layers {
        for u in 0..hidden {
            init.h[l][u] = rng.random_range(-0.5..0.5);
            init.c[l][u] = rng.random_range(-0.5..0.5);
        }
    }
    let dropout = rng.random_bool(0.5).then(|| DropoutMasks::sample(&mut rng, steps, layers, hidden, 0.3));

    let analytic = net.bptt_gradients(&inputs, targets, &mask, &init, dropout.as_ref()).unwrap().grads;
    let loss = |net: &LstmNetwork| net.bptt_gradients(&inputs, targets, &mask, &init, dropout.as_ref()).unwrap().loss;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let up = loss(&net);
        net.params_mut()[i] = orig - h;
        let down = loss(&net);
        net.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
