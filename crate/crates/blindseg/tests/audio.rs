use std::f64::consts::PI;
use std::path::Path;

use blindseg::corpus::{Corpus, Split};
use blindseg::phn::{write_phn, PhoneAnnotation, PhoneSegment};
use blindseg::pipeline::{self, Hypotheses};
use blindseg::wav::write_pcm16;
use blindseg::PipelineConfig;
use blindseg_core::MatchMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RATE: u32 = 16_000;
const TONES: [f64; 5] = [300.0, 700.0, 1200.0, 2100.0, 3400.0];

/// One utterance of tone segments bracketed by silence, with its annotation.
fn utterance(rng: &mut ChaCha8Rng) -> (Vec<f64>, PhoneAnnotation) {
    let mut samples = Vec::new();
    let mut segments = Vec::new();
    let mut push = |samples: &mut Vec<f64>, label: &str, n: usize, f: Option<f64>, rng: &mut ChaCha8Rng| {
        let start = samples.len() as u64;
        for i in 0..n {
            let tone = f.map_or(0.0, |f| 0.5 * (2.0 * PI * f * i as f64 / f64::from(RATE)).sin());
            samples.push(tone + rng.random_range(-0.005..0.005));
        }
        segments.push(PhoneSegment { start, end: samples.len() as u64, label: label.into() });
    };
    push(&mut samples, "h#", 1600, None, rng);
    let mut last = usize::MAX;
    for _ in 0..rng.random_range(6..10) {
        let mut k = rng.random_range(0..TONES.len());
        if k == last {
            k = (k + 1) % TONES.len();
        }
        last = k;
        let n = rng.random_range(800..2400);
        push(&mut samples, &format!("p{k}"), n, Some(TONES[k]), rng);
    }
    push(&mut samples, "h#", 1600, None, rng);
    (samples, PhoneAnnotation { segments, sample_rate: RATE })
}

fn write_corpus(root: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (split, n) in [("TRAIN", 12), ("TEST", 4)] {
        for u in 0..n {
            let dir = root.join(split).join("DR1").join(format!("SPK{}", u % 3));
            std::fs::create_dir_all(&dir).unwrap();
            let (samples, ann) = utterance(&mut rng);
            write_pcm16(&dir.join(format!("SX{u}.WAV")), &samples, RATE).unwrap();
            write_phn(&dir.join(format!("SX{u}.PHN")), &ann).unwrap();
        }
    }
}

fn config(dir: &Path) -> PipelineConfig {
    let mut config = PipelineConfig::default();
    config.corpus.root = dir.join("timit");
    config.corpus.work_dir = dir.join("work");
    config.quantizer.k = 5;
    config
}

#[test]
fn discovers_annotated_audio() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("timit"));
    let corpus = Corpus::discover(&dir.path().join("timit")).unwrap();
    assert_eq!((corpus.ids(Split::Train).len(), corpus.ids(Split::Test).len()), (12, 4));
}

#[test]
fn markov_beats_periodic_on_tones() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("timit"));
    let mut config = config(dir.path());
    config.eval.trim_silence = true;
    pipeline::prepare(&config).unwrap();
    pipeline::train(&config).unwrap();
    let best = pipeline::sweep(&config)
        .unwrap()
        .into_iter()
        .max_by(|a, b| a.report.f_score.total_cmp(&b.report.f_score))
        .unwrap();
    let periodic = pipeline::evaluate(&config, &Hypotheses::Periodic, &[MatchMode::Cropped]).unwrap().remove(0).2;
    assert!(best.report.f_score > periodic.f_score + 0.1, "{} vs {}", best.report.f_score, periodic.f_score);
    assert!(best.report.r_value > periodic.r_value);
}

#[test]
fn continuous_model_runs_on_features() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("timit"));
    let mut config = config(dir.path());
    config.model.kind = blindseg::config::ModelKind::RnnMfcc;
    config.model.rnn.max_epochs = 2;
    config.model.rnn.hidden_dim_mfcc = 6;
    pipeline::prepare(&config).unwrap();
    pipeline::train(&config).unwrap();
    let out = dir.path().join("bnd");
    let s = pipeline::segment(&config, 0.5, &out).unwrap();
    assert_eq!(s.utterances, 4);
    let rows = pipeline::evaluate(&config, &Hypotheses::Directory(out), &[MatchMode::Cropped]).unwrap();
    assert_eq!(rows.len(), 1);
}
