//! Boundary matching under a tolerance window and the P / R / F / OS /
//! R-value metrics, pooled over a corpus.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::segment::{detect_boundaries, BoundarySet, ErrorSignal, PeakRule};

pub const DEFAULT_TOLERANCE_MS: f64 = 20.0;

// Absorbs float noise in `|h - g| <= tol` when both sides sit on a 5 ms grid.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Windows of neighbouring gold boundaries are cut at their midpoint;
    /// a hypothesis can detect at most one gold boundary.
    #[default]
    Cropped,
    /// Full windows; one hypothesis may detect several gold boundaries.
    Overlapping,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub n_gold: usize,
    pub n_hyp: usize,
    /// Gold boundaries detected.
    pub n_hit: usize,
    pub mode: MatchMode,
    pub tolerance_ms: f64,
}

/// Detection window `[lo, hi]` of every gold boundary in seconds, plus
/// whether `hi` is open (cut at a midpoint owned by the next boundary).
pub fn gold_windows(gold: &[f64], tolerance_s: f64, mode: MatchMode) -> Vec<(f64, f64, bool)> {
    let n = gold.len();
    (0..n)
        .map(|i| {
            let g = gold[i];
            let mut lo = g - tolerance_s - TIME_EPS;
            let mut hi = g + tolerance_s + TIME_EPS;
            let mut open = false;
            if mode == MatchMode::Cropped {
                if i > 0 {
                    lo = lo.max(0.5 * (gold[i - 1] + g));
                }
                if i + 1 < n {
                    let mid = 0.5 * (g + gold[i + 1]);
                    if mid <= hi {
                        hi = mid;
                        open = true;
                    }
                }
            }
            (lo, hi, open)
        })
        .collect()
}

pub fn match_boundaries(
    gold: &BoundarySet,
    hyp: &BoundarySet,
    tolerance_ms: f64,
    mode: MatchMode,
) -> Result<MatchResult> {
    if !(tolerance_ms >= 0.0) {
        return Err(Error::InvalidConfig("tolerance must be nonnegative".into()));
    }
    let h = hyp.times();
    let windows = gold_windows(gold.times(), tolerance_ms / 1000.0, mode);
    // windows are sorted by their low end in both modes
    let mut first = 0;
    let mut n_hit = 0;
    for (lo, hi, open) in windows {
        while first < h.len() && h[first] < lo {
            first += 1;
        }
        if first < h.len() && (h[first] < hi || (!open && h[first] <= hi)) {
            n_hit += 1;
        }
    }
    Ok(MatchResult { n_gold: gold.len(), n_hyp: hyp.len(), n_hit, mode, tolerance_ms })
}

/// Metrics in natural units (multiply by 100 for the usual percentages).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub over_segmentation: f64,
    pub r_value: f64,
}

pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// R-value from recall and over-segmentation:
/// `1 - (sqrt((1-R)^2 + OS^2) + |(R - OS - 1)/sqrt 2|) / 2`.
pub fn r_value(recall: f64, over_segmentation: f64) -> f64 {
    let r1 = math::sqrt((1.0 - recall) * (1.0 - recall) + over_segmentation * over_segmentation);
    let r2 = (-over_segmentation + recall - 1.0) / core::f64::consts::SQRT_2;
    1.0 - (r1.abs() + r2.abs()) / 2.0
}

/// The variant with `|(R + 1 - OS)/sqrt 2|` as the second distance. It does
/// not measure the distance to the `P = 1` line; kept for comparison only.
pub fn r_value_sign_flipped(recall: f64, over_segmentation: f64) -> f64 {
    let r1 = math::sqrt((1.0 - recall) * (1.0 - recall) + over_segmentation * over_segmentation);
    let r2 = (recall + 1.0 - over_segmentation) / core::f64::consts::SQRT_2;
    1.0 - (r1.abs() + r2.abs()) / 2.0
}

/// Metrics from precision and recall alone.
pub fn metrics_from_pr(precision: f64, recall: f64) -> EvaluationReport {
    let over_segmentation = recall / precision - 1.0;
    EvaluationReport {
        precision,
        recall,
        f_score: f_score(precision, recall),
        over_segmentation,
        r_value: r_value(recall, over_segmentation),
    }
}

/// Precision is 1 for an empty hypothesis set and is capped at 1 (in
/// overlapping mode detected gold boundaries can outnumber hypotheses).
/// When nothing is detected, OS falls back to the count form
/// `n_hyp / n_gold - 1`, which equals `R/P - 1` whenever both are defined.
pub fn compute_metrics(m: &MatchResult) -> Result<EvaluationReport> {
    if m.n_gold == 0 {
        return Err(Error::NoGold);
    }
    let recall = m.n_hit as f64 / m.n_gold as f64;
    let precision = if m.n_hyp == 0 { 1.0 } else { (m.n_hit as f64 / m.n_hyp as f64).min(1.0) };
    let over_segmentation = if precision > 0.0 {
        recall / precision - 1.0
    } else {
        m.n_hyp as f64 / m.n_gold as f64 - 1.0
    };
    Ok(EvaluationReport {
        precision,
        recall,
        f_score: f_score(precision, recall),
        over_segmentation,
        r_value: r_value(recall, over_segmentation),
    })
}

/// Pool counts over utterances; metrics are then computed on the totals.
pub fn aggregate(per_utterance: &[MatchResult]) -> Result<MatchResult> {
    let (first, rest) = per_utterance.split_first().ok_or(Error::EmptyCorpus)?;
    let mut total = *first;
    for m in rest {
        if m.mode != total.mode || m.tolerance_ms != total.tolerance_ms {
            return Err(Error::MixedModes);
        }
        total.n_gold += m.n_gold;
        total.n_hyp += m.n_hyp;
        total.n_hit += m.n_hit;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub tolerance_ms: f64,
    pub mode: MatchMode,
    pub rule: PeakRule,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { tolerance_ms: DEFAULT_TOLERANCE_MS, mode: MatchMode::Cropped, rule: PeakRule::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub delta: f64,
    pub matched: MatchResult,
    pub report: EvaluationReport,
}

/// Segment and score every utterance at each threshold, ascending.
pub fn sweep_threshold(
    errors: &[ErrorSignal],
    gold: &[BoundarySet],
    deltas: &[f64],
    settings: &SweepSettings,
) -> Result<Vec<SweepPoint>> {
    if errors.len() != gold.len() {
        return Err(Error::DimensionMismatch { expected: errors.len(), got: gold.len() });
    }
    if deltas.is_empty() || deltas.iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::InvalidConfig("need at least one nonnegative threshold".into()));
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_iter()
        .map(|delta| {
            let per_utt = errors
                .iter()
                .zip(gold)
                .map(|(e, g)| {
                    let hyp = detect_boundaries(e, delta, settings.rule)
                        .to_seconds(crate::segment::BoundaryKind::Hypothesis);
                    match_boundaries(g, &hyp, settings.tolerance_ms, settings.mode)
                })
                .collect::<Result<Vec<_>>>()?;
            let matched = aggregate(&per_utt)?;
            Ok(SweepPoint { delta, matched, report: compute_metrics(&matched)? })
        })
        .collect()
}
