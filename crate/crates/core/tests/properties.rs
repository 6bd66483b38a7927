use blindseg_core::nn::{init_network, make_skip_mask, nn_error_signal, NetworkConfig, RmsProp, SequenceRef};
use blindseg_core::*;
use proptest::prelude::*;

fn sorted_times(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(0u32..2000, 0..max).prop_map(|s| s.into_iter().map(|k| k as f64 * 0.001).collect())
}

fn symbols(n: usize, len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..n, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn seconds_frames_round_trip(times in sorted_times(30), hop in prop::sample::select(vec![5.0, 10.0, 12.5])) {
        let set = BoundarySet::new(times.clone(), BoundaryKind::Gold).unwrap();
        let back = boundaries_to_seconds(&set.to_frames(hop));
        for t in &times {
            let nearest = back.times().iter().map(|b| (b - t).abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest <= hop / 2000.0 + 1e-12);
        }
    }

    #[test]
    fn zero_prefix_is_idempotent(v in prop::collection::vec(0.0..5.0f64, 0..20), n in 0usize..12) {
        let once = ErrorSignal::new("u", v.clone(), 10.0).unwrap().zero_prefix(n);
        let twice = once.clone().zero_prefix(n);
        prop_assert_eq!(&once, &twice);
        let k = n.min(v.len());
        prop_assert!(once.values()[..k].iter().all(|&x| x == 0.0));
        prop_assert_eq!(&once.values()[k..], &v[k..]);
    }

    #[test]
    fn threshold_only_removes_boundaries(v in prop::collection::vec(0.0..3.0f64, 0..60), d1 in 0.0..2.0f64, extra in 0.0..2.0f64) {
        let e = ErrorSignal::new("u", v, 10.0).unwrap();
        let lo = detect_boundaries(&e, d1, PeakRule::default()).frames;
        let hi = detect_boundaries(&e, d1 + extra, PeakRule::default()).frames;
        prop_assert!(hi.iter().all(|f| lo.contains(f)));
        prop_assert!(lo.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_threshold_emits_every_peak(v in prop::collection::vec(0.0..3.0f64, 0..60)) {
        let e = ErrorSignal::new("u", v.clone(), 10.0).unwrap();
        prop_assert_eq!(detect_boundaries(&e, 0.0, PeakRule::default()).frames, local_maxima(&v));
    }

    #[test]
    fn identical_sets_match_fully(times in sorted_times(20)) {
        prop_assume!(!times.is_empty());
        let g = BoundarySet::new(times.clone(), BoundaryKind::Gold).unwrap();
        let h = BoundarySet::new(times, BoundaryKind::Hypothesis).unwrap();
        for mode in [MatchMode::Cropped, MatchMode::Overlapping] {
            let m = match_boundaries(&g, &h, 20.0, mode).unwrap();
            prop_assert_eq!(m.n_hit, g.len());
            let r = compute_metrics(&m).unwrap();
            prop_assert!((r.f_score - 1.0).abs() < 1e-12 && (r.r_value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_are_consistent(g in sorted_times(20), h in sorted_times(20)) {
        prop_assume!(!g.is_empty());
        let gold = BoundarySet::new(g, BoundaryKind::Gold).unwrap();
        let hyp = BoundarySet::new(h, BoundaryKind::Hypothesis).unwrap();
        let m = match_boundaries(&gold, &hyp, 20.0, MatchMode::Cropped).unwrap();
        let r = compute_metrics(&m).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.precision) && (0.0..=1.0).contains(&r.recall));
        prop_assert!(r.f_score <= r.precision.max(r.recall) + 1e-12);
        prop_assert!(r.f_score >= r.precision.min(r.recall) - 1e-12);
        prop_assert!(r.r_value <= 1.0 + 1e-12);
        if r.precision > 0.0 {
            prop_assert!((r.over_segmentation - (r.recall / r.precision - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn pooling_sums_counts(parts in prop::collection::vec((1usize..20, 0usize..20, 0usize..20), 1..6)) {
        let results: Vec<MatchResult> = parts
            .iter()
            .map(|&(g, h, hit)| MatchResult {
                n_gold: g,
                n_hyp: h,
                n_hit: hit.min(g).min(h),
                mode: MatchMode::Cropped,
                tolerance_ms: 20.0,
            })
            .collect();
        let pooled = aggregate(&results).unwrap();
        prop_assert_eq!(pooled.n_gold, results.iter().map(|m| m.n_gold).sum::<usize>());
        prop_assert_eq!(pooled.n_hit, results.iter().map(|m| m.n_hit).sum::<usize>());
    }

    #[test]
    fn markov_rows_are_distributions(seqs in prop::collection::vec(symbols(5, 0..40), 1..5), order in 1usize..4) {
        let seqs: Vec<CategoricalSequence> = seqs
            .into_iter()
            .enumerate()
            .map(|(i, s)| CategoricalSequence::new(format!("u{i}"), s, 5, 10.0).unwrap())
            .collect();
        let model = match fit_markov(&seqs, order, 1.0) {
            Ok(m) => m,
            Err(_) => return Ok(()),
        };
        for lag in 1..=order {
            for ctx in 0..5 {
                let s: f64 = (0..5).map(|n| model.prob(lag, ctx, n)).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }
        for seq in &seqs {
            let e = model.error_signal(seq).unwrap();
            prop_assert!(e.values()[..order.min(seq.len())].iter().all(|&x| x == 0.0));
            prop_assert!(e.values().iter().all(|&x| x >= -(order as f64).ln() - 1e-12));
        }
    }

    #[test]
    fn skip_mask_keeps_every_change(s in symbols(3, 1..200), seed in any::<u64>()) {
        let seq = CategoricalSequence::new("u", s.clone(), 3, 10.0).unwrap();
        let mask = make_skip_mask(&seq, 0.8, seed);
        prop_assert!(mask[0]);
        for t in 1..s.len() {
            if s[t] != s[t - 1] {
                prop_assert!(mask[t]);
            }
        }
        prop_assert_eq!(mask, make_skip_mask(&seq, 0.8, seed));
    }

    #[test]
    fn rmsprop_matches_formula(
        g in prop::collection::vec(-5.0..5.0f64, 1..20),
        seed in any::<u64>(),
    ) {
        let n = g.len();
        let p0: Vec<f64> = (0..n).map(|i| ((seed as f64) + i as f64).sin()).collect();
        let c0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos().abs()).collect();
        let (mut p, mut c) = (p0.clone(), c0.clone());
        RmsProp { lr: 0.01, rho: 0.9, eps: 1e-8 }.step(&mut p, &mut c, &g).unwrap();
        for i in 0..n {
            let cache = 0.9 * c0[i] + 0.1 * g[i] * g[i];
            prop_assert!((c[i] - cache).abs() < 1e-12);
            prop_assert!((p[i] - (p0[i] - 0.01 * g[i] / (cache.sqrt() + 1e-8))).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn nn_error_is_causal(s in symbols(4, 5..30), cut in 1usize..5, seed in any::<u64>()) {
        let mut cfg = NetworkConfig::categorical(4);
        cfg.hidden_dim = 6;
        let net = init_network(&cfg, seed).unwrap();
        let a = CategoricalSequence::new("a", s.clone(), 4, 10.0).unwrap();
        let mut t2 = s.clone();
        let cut = cut.min(s.len() - 1);
        for x in &mut t2[cut + 1..] {
            *x = (*x + 1) % 4;
        }
        let b = CategoricalSequence::new("b", t2, 4, 10.0).unwrap();
        let ea = nn_error_signal(&net, SequenceRef::Categorical(&a)).unwrap();
        let eb = nn_error_signal(&net, SequenceRef::Categorical(&b)).unwrap();
        prop_assert_eq!(&ea.values()[..=cut], &eb.values()[..=cut]);

        let out = net.forward(&a.one_hot_matrix()).unwrap();
        for row in out.iter_rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
