//! Error signals, peak picking and boundary sets.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Frames zeroed at the start of every error signal (70 ms at a 10 ms hop).
pub const PREFIX_FRAMES: usize = 7;

/// Per-frame prediction error of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSignal {
    values: Vec<f64>,
    hop_ms: f64,
    utterance_id: String,
}

impl ErrorSignal {
    pub fn new(utterance_id: impl Into<String>, values: Vec<f64>, hop_ms: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("non-finite value in error signal".into()));
        }
        Ok(Self { values, hop_ms, utterance_id: utterance_id.into() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn hop_ms(&self) -> f64 {
        self.hop_ms
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    /// Set the first `min(n, len)` values to 0.
    pub fn zero_prefix(mut self, n: usize) -> Self {
        let n = n.min(self.values.len());
        self.values[..n].fill(0.0);
        self
    }
}

/// What a peak's height is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakRule {
    /// Minimum since the preceding local maximum, i.e. the valley right
    /// before the peak. A peak's height does not depend on the threshold,
    /// so raising the threshold only ever removes boundaries.
    #[default]
    PreviousLocalMinimum,
    /// Minimum since the last *emitted* boundary (running minimum reset on
    /// emission). Not monotone in the threshold.
    SinceLastBoundary,
}

/// Indices of local maxima. A maximum is a run of equal values that is
/// strictly higher than both of its neighbours; it is reported at the
/// first frame of the run. Neither end of the signal can be a maximum.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Frame-indexed boundaries, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBoundaries {
    pub frames: Vec<usize>,
    pub hop_ms: f64,
}

impl FrameBoundaries {
    pub fn to_seconds(&self, kind: BoundaryKind) -> BoundarySet {
        BoundarySet {
            times: self.frames.iter().map(|&f| f as f64 * self.hop_ms / 1000.0).collect(),
            kind,
        }
    }
}

/// Peak picking over an error signal: a local maximum becomes a boundary
/// iff its value exceeds the reference minimum (see [`PeakRule`]) by more
/// than `delta`.
pub fn detect_boundaries(error: &ErrorSignal, delta: f64, rule: PeakRule) -> FrameBoundaries {
    let v = error.values();
    let mut frames = Vec::new();
    let mut maxima = local_maxima(v).into_iter().peekable();
    let mut running_min = f64::INFINITY;
    for (t, &x) in v.iter().enumerate() {
        if x < running_min {
            running_min = x;
        }
        if maxima.peek() == Some(&t) {
            maxima.next();
            let emit = x - running_min > delta;
            if emit {
                frames.push(t);
            }
            if emit || rule == PeakRule::PreviousLocalMinimum {
                running_min = x;
            }
        }
    }
    FrameBoundaries { frames, hop_ms: error.hop_ms() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Gold,
    Hypothesis,
}

/// Boundary times in seconds, strictly increasing and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    times: Vec<f64>,
    kind: BoundaryKind,
}

const EDGE_EPS: f64 = 1e-9;

impl BoundarySet {
    pub fn new(times: Vec<f64>, kind: BoundaryKind) -> Result<Self> {
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Unsorted);
        }
        Ok(Self { times, kind })
    }

    pub fn empty(kind: BoundaryKind) -> Self {
        Self { times: Vec::new(), kind }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Nearest frame index per boundary (duplicates merged).
    pub fn to_frames(&self, hop_ms: f64) -> FrameBoundaries {
        let mut frames: Vec<usize> =
            self.times.iter().map(|t| math::round(t * 1000.0 / hop_ms) as usize).collect();
        frames.dedup();
        FrameBoundaries { frames, hop_ms }
    }

    /// Drop boundaries at time 0 and at (or past) `duration_secs`.
    pub fn without_edges(&self, duration_secs: f64) -> Self {
        let times = self
            .times
            .iter()
            .copied()
            .filter(|&t| t > EDGE_EPS && t < duration_secs - EDGE_EPS)
            .collect();
        Self { times, kind: self.kind }
    }

    /// Keep boundaries inside `[start, end]`.
    pub fn restrict(&self, start: f64, end: f64) -> Self {
        let times = self
            .times
            .iter()
            .copied()
            .filter(|&t| t >= start - EDGE_EPS && t <= end + EDGE_EPS)
            .collect();
        Self { times, kind: self.kind }
    }
}

/// Frame-indexed boundaries to seconds (`frame * hop`).
pub fn boundaries_to_seconds(b: &FrameBoundaries) -> BoundarySet {
    b.to_seconds(BoundaryKind::Hypothesis)
}

/// Baseline with a boundary every `period_ms`, strictly inside an
/// utterance of `n_frames * hop_ms`.
pub fn periodic_boundaries(n_frames: usize, hop_ms: f64, period_ms: f64) -> Result<BoundarySet> {
    if !(period_ms > 0.0) {
        return Err(Error::InvalidConfig("period must be positive".into()));
    }
    let duration_ms = n_frames as f64 * hop_ms;
    let mut times = Vec::new();
    let mut k = 1u64;
    loop {
        let t = k as f64 * period_ms;
        if t >= duration_ms - 1e-9 {
            break;
        }
        times.push(t / 1000.0);
        k += 1;
    }
    BoundarySet::new(times, BoundaryKind::Hypothesis)
}
