//! Piecewise-stationary synthetic corpora with known boundaries.
//!
//! An utterance is a chain of segments. Each segment is an instance of a
//! "phone" from a small inventory and emits frames i.i.d. from that
//! phone's distribution: a categorical distribution peaked on one symbol,
//! or a Gaussian around a phone-specific mean vector. Consecutive segments
//! always use different phones. Gold boundaries are the interior joins.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio::FrameSequence;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::quantizer::CategoricalSequence;
use crate::rng::{seeded, standard_normal, stream, sub_seed};
use crate::segment::FrameBoundaries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_utterances: usize,
    pub min_segments: usize,
    pub max_segments: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Alphabet size for categorical output.
    pub n_symbols: usize,
    pub n_phones: usize,
    /// Probability mass a categorical phone puts on its dominant symbol.
    pub peak_mass: f64,
    /// Frame dimension for continuous output.
    pub dim: usize,
    /// Standard deviation of continuous phone means.
    pub mean_spread: f64,
    pub noise_std: f64,
    pub hop_ms: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_utterances: 200,
            min_segments: 10,
            max_segments: 20,
            min_len: 4,
            max_len: 15,
            n_symbols: 8,
            n_phones: 8,
            peak_mass: 0.9,
            dim: 13,
            mean_spread: 3.0,
            noise_std: 1.0,
            hop_ms: 10.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.min_segments == 0 || self.min_segments > self.max_segments {
            return bad("need 1 <= min_segments <= max_segments");
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad("need 1 <= min_len <= max_len");
        }
        if self.n_phones == 0 || (self.max_segments > 1 && self.n_phones < 2) {
            return bad("need at least two phones for multi-segment utterances");
        }
        if self.n_symbols == 0 || !(0.0..=1.0).contains(&self.peak_mass) {
            return bad("n_symbols must be positive and peak_mass in [0, 1]");
        }
        if self.dim == 0 || !(self.noise_std >= 0.0) || !(self.mean_spread >= 0.0) || !(self.hop_ms > 0.0) {
            return bad("dim, noise_std, mean_spread or hop_ms out of range");
        }
        Ok(())
    }
}

/// Segment phones and lengths of one utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentPlan {
    pub phones: Vec<usize>,
    pub lengths: Vec<usize>,
}

impl SegmentPlan {
    pub fn n_frames(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// Frame index where each segment after the first begins.
    pub fn joins(&self) -> Vec<usize> {
        self.lengths
            .iter()
            .scan(0, |acc, l| {
                *acc += l;
                Some(*acc)
            })
            .take(self.lengths.len().saturating_sub(1))
            .collect()
    }

    fn sample<R: Rng + ?Sized>(spec: &SynthSpec, rng: &mut R) -> Self {
        let n = rng.random_range(spec.min_segments..=spec.max_segments);
        let mut phones = Vec::with_capacity(n);
        let mut lengths = Vec::with_capacity(n);
        for i in 0..n {
            let phone = if i == 0 {
                rng.random_range(0..spec.n_phones)
            } else {
                let prev = phones[i - 1];
                (prev + 1 + rng.random_range(0..spec.n_phones - 1)) % spec.n_phones
            };
            phones.push(phone);
            lengths.push(rng.random_range(spec.min_len..=spec.max_len));
        }
        Self { phones, lengths }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance<T> {
    pub id: String,
    pub plan: SegmentPlan,
    pub gold: FrameBoundaries,
    pub data: T,
}

fn categorical_phone(spec: &SynthSpec, phone: usize) -> Vec<f64> {
    let n = spec.n_symbols;
    let dominant = phone % n;
    if n == 1 {
        return alloc::vec![1.0];
    }
    let rest = (1.0 - spec.peak_mass) / (n - 1) as f64;
    (0..n).map(|s| if s == dominant { spec.peak_mass } else { rest }).collect()
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Categorical corpus. Utterance ids are `"{prefix}{index:04}"`; the
/// prefix also selects the random stream, so one seed can produce disjoint
/// train and test sets.
pub fn synth_categorical(spec: &SynthSpec, prefix: &str) -> Result<Vec<SynthUtterance<CategoricalSequence>>> {
    spec.validate()?;
    let phones: Vec<Vec<f64>> = (0..spec.n_phones).map(|p| categorical_phone(spec, p)).collect();
    let mut rng = seeded(sub_seed(spec.seed ^ prefix_hash(prefix), stream::SYNTH));
    (0..spec.n_utterances)
        .map(|u| {
            let plan = SegmentPlan::sample(spec, &mut rng);
            let mut symbols = Vec::with_capacity(plan.n_frames());
            for (&p, &len) in plan.phones.iter().zip(&plan.lengths) {
                symbols.extend((0..len).map(|_| draw(&phones[p], &mut rng)));
            }
            let id = format!("{prefix}{u:04}");
            let data = CategoricalSequence::new(id.clone(), symbols, spec.n_symbols, spec.hop_ms)?;
            let gold = FrameBoundaries { frames: plan.joins(), hop_ms: spec.hop_ms };
            Ok(SynthUtterance { id, plan, gold, data })
        })
        .collect()
}

/// Gaussian-emission corpus. Phone means depend only on `spec.seed`, so
/// corpora generated with the same seed share an inventory; utterances
/// depend on the prefix as well.
pub fn synth_continuous(spec: &SynthSpec, prefix: &str) -> Result<Vec<SynthUtterance<FrameSequence>>> {
    spec.validate()?;
    let mut inv_rng = seeded(sub_seed(spec.seed, stream::SYNTH ^ 0xFF));
    let means: Vec<Vec<f64>> = (0..spec.n_phones)
        .map(|_| (0..spec.dim).map(|_| spec.mean_spread * standard_normal(&mut inv_rng)).collect())
        .collect();
    let mut rng = seeded(sub_seed(spec.seed ^ prefix_hash(prefix), stream::SYNTH));
    (0..spec.n_utterances)
        .map(|u| {
            let plan = SegmentPlan::sample(spec, &mut rng);
            let mut data = Vec::with_capacity(plan.n_frames() * spec.dim);
            for (&p, &len) in plan.phones.iter().zip(&plan.lengths) {
                for _ in 0..len {
                    data.extend(means[p].iter().map(|m| m + spec.noise_std * standard_normal(&mut rng)));
                }
            }
            let id = format!("{prefix}{u:04}");
            let frames = Matrix::from_vec(plan.n_frames(), spec.dim, data)?;
            let data = FrameSequence::new(id.clone(), frames, spec.hop_ms)?;
            let gold = FrameBoundaries { frames: plan.joins(), hop_ms: spec.hop_ms };
            Ok(SynthUtterance { id, plan, gold, data })
        })
        .collect()
}

fn prefix_hash(prefix: &str) -> u64 {
    prefix.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

/// Deterministic cyclic symbol streams `offset, offset+1, ... (mod period)`.
pub fn cyclic_sequences(n: usize, len: usize, period: usize, n_symbols: usize) -> Vec<CategoricalSequence> {
    (0..n)
        .map(|u| {
            let symbols = (0..len).map(|t| (t + u) % period).collect();
            CategoricalSequence::new(format!("cyc{u:04}"), symbols, n_symbols, 10.0)
                .expect("period must not exceed the alphabet")
        })
        .collect()
}

/// Noiseless linear dynamics `x_{t+1} = A x_t`: coordinate pairs rotate at
/// fixed angular speeds, an odd trailing coordinate stays constant. Each
/// utterance gets its own random amplitudes and phases.
pub fn rotation_dynamics(n: usize, len: usize, dim: usize, seed: u64) -> Vec<FrameSequence> {
    let mut rng = seeded(sub_seed(seed, stream::SYNTH ^ 0xD1));
    let pairs = dim / 2;
    (0..n)
        .map(|u| {
            let amp: Vec<f64> = (0..pairs).map(|_| rng.random_range(0.5..1.0)).collect();
            let phase: Vec<f64> = (0..pairs).map(|_| rng.random_range(0.0..core::f64::consts::TAU)).collect();
            let constant = rng.random_range(-0.5..0.5);
            let mut data = Vec::with_capacity(len * dim);
            for t in 0..len {
                for k in 0..pairs {
                    let angle = phase[k] + t as f64 * 0.2 * (k + 1) as f64;
                    data.push(amp[k] * math::cos(angle));
                    data.push(amp[k] * math::sin(angle));
                }
                if dim % 2 == 1 {
                    data.push(constant);
                }
            }
            FrameSequence::new(format!("rot{u:04}"), Matrix::from_vec(len, dim, data).unwrap(), 10.0).unwrap()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_segment_has_no_interior_boundary() {
        let spec = SynthSpec { n_utterances: 1, min_segments: 1, max_segments: 1, ..SynthSpec::default() };
        let u = synth_categorical(&spec, "s").unwrap();
        assert!(u[0].gold.frames.is_empty());
    }

    #[test]
    fn fixed_lengths_give_regular_joins() {
        let spec = SynthSpec {
            n_utterances: 3,
            min_segments: 10,
            max_segments: 10,
            min_len: 8,
            max_len: 8,
            ..SynthSpec::default()
        };
        for u in synth_categorical(&spec, "s").unwrap() {
            assert_eq!(u.gold.frames, (1..10).map(|k| 8 * k).collect::<Vec<_>>());
            assert_eq!(u.data.len(), 80);
        }
    }

    #[test]
    fn gold_matches_plan_and_neighbours_differ() {
        let spec = SynthSpec { n_utterances: 20, ..SynthSpec::default() };
        let a = synth_categorical(&spec, "t").unwrap();
        assert_eq!(a, synth_categorical(&spec, "t").unwrap());
        for u in &a {
            assert_eq!(u.gold.frames, u.plan.joins());
            assert_eq!(u.data.len(), u.plan.n_frames());
            assert!(u.plan.phones.windows(2).all(|w| w[0] != w[1]));
            assert!(u.plan.lengths.iter().all(|l| (4..=15).contains(l)));
        }
        assert_ne!(a[0].data.symbols(), synth_categorical(&spec, "u").unwrap()[0].data.symbols());
        let c = synth_continuous(&spec, "t").unwrap();
        assert_eq!(c, synth_continuous(&spec, "t").unwrap());
        assert_eq!(c[0].data.dim(), 13);
    }

    #[test]
    fn invalid_specs() {
        assert!(SynthSpec { min_segments: 0, ..SynthSpec::default() }.validate().is_err());
        assert!(SynthSpec { min_len: 9, max_len: 3, ..SynthSpec::default() }.validate().is_err());
        assert!(SynthSpec { n_phones: 1, ..SynthSpec::default() }.validate().is_err());
    }

    #[test]
    fn generators_for_learnability() {
        let c = cyclic_sequences(2, 9, 4, 8);
        assert_eq!(c[1].symbols(), &[1, 2, 3, 0, 1, 2, 3, 0, 1]);
        let r = rotation_dynamics(1, 5, 13, 0);
        assert_eq!(r[0].dim(), 13);
        assert_eq!(r[0].frame(0)[12], r[0].frame(4)[12]);
    }
}
