mod support;

use blindseg_core::nn::PredictorKind;
use blindseg_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn mfcc_matches_reference_on_tone() {
    let sr = 16000;
    let samples: Vec<f64> =
        (0..sr / 2).map(|n| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / sr as f64).sin()).collect();
    let ours = compute_mfcc(&AudioSignal::new(samples.clone(), sr as u32).unwrap(), &MfccConfig::default()).unwrap();
    let reference = ReferenceMfcc::default().compute(&samples);
    assert_eq!(ours.len(), reference.len());
    let mut worst: f64 = 0.0;
    for (t, row) in reference.iter().enumerate() {
        for (a, b) in ours.frame(t).iter().zip(row) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-3, "max deviation {worst}");
}

#[test]
fn mfcc_matches_reference_on_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<f64> = (0..4000).map(|_| rng.random_range(-0.3..0.3)).collect();
    let ours = compute_mfcc(&AudioSignal::new(samples.clone(), 16000).unwrap(), &MfccConfig::default()).unwrap();
    let reference = ReferenceMfcc::default().compute(&samples);
    for (t, row) in reference.iter().enumerate() {
        for (a, b) in ours.frame(t).iter().zip(row) {
            assert!((a - b).abs() < 1e-3);
        }
    }
}

#[test]
fn peaks_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..500 {
        let n = rng.random_range(0..40);
        // coarse levels make plateaus and ties common
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 * 0.5).collect();
        let e = ErrorSignal::new("x", v.clone(), 10.0).unwrap();
        for &delta in &[0.0, 0.4, 0.5, 1.0, 1.7, 2.5] {
            for rule in [PeakRule::PreviousLocalMinimum, PeakRule::SinceLastBoundary] {
                assert_eq!(
                    detect_boundaries(&e, delta, rule).frames,
                    brute_peaks(&v, delta, rule),
                    "trial {trial} delta {delta} rule {rule:?} signal {v:?}"
                );
            }
        }
    }
}

#[test]
fn peaks_monotone_in_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let v: Vec<f64> = (0..60).map(|_| rng.random_range(0.0..3.0)).collect();
        let e = ErrorSignal::new("x", v, 10.0).unwrap();
        let mut prev = detect_boundaries(&e, 0.0, PeakRule::default()).frames;
        for k in 1..30 {
            let cur = detect_boundaries(&e, k as f64 * 0.1, PeakRule::default()).frames;
            assert!(cur.iter().all(|f| prev.contains(f)));
            prev = cur;
        }
    }
}

#[test]
fn cropped_matching_is_optimal_one_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let g = random_times(&mut rng, 10);
        let h = random_times(&mut rng, 10);
        if g.is_empty() {
            continue;
        }
        let gold = BoundarySet::new(g.clone(), BoundaryKind::Gold).unwrap();
        let hyp = BoundarySet::new(h.clone(), BoundaryKind::Hypothesis).unwrap();
        let cropped = match_boundaries(&gold, &hyp, 20.0, MatchMode::Cropped).unwrap();
        let overlapping = match_boundaries(&gold, &hyp, 20.0, MatchMode::Overlapping).unwrap();
        assert_eq!(cropped.n_hit, brute_cropped_hits(&g, &h, 0.020), "gold {g:?} hyp {h:?}");
        assert_eq!(overlapping.n_hit, brute_overlapping_hits(&g, &h, 0.020), "gold {g:?} hyp {h:?}");
        assert!(overlapping.n_hit >= cropped.n_hit);
        assert!(cropped.n_hit <= cropped.n_hyp.min(cropped.n_gold));
    }
}

#[test]
fn quantize_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let centroids = Matrix::from_vec(8, 13, (0..8 * 13).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let codebook = Codebook::from_centroids(centroids.clone(), 0.0, 0).unwrap();
    let frames = Matrix::from_vec(1000, 13, (0..1000 * 13).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
    let seq = FrameSequence::new("q", frames.clone(), 10.0).unwrap();
    let symbols = quantize(&codebook, &seq).unwrap();
    for t in 0..1000 {
        assert_eq!(symbols.symbols()[t], brute_nearest(&centroids, frames.row(t)));
    }
}

#[test]
fn gradients_match_finite_differences() {
    for trial in 0..100 {
        for kind in [PredictorKind::Categorical, PredictorKind::Continuous] {
            let err = gradient_check_trial(trial, kind);
            assert!(err < 1e-4, "trial {trial} {kind:?}: relative error {err}");
        }
    }
}
