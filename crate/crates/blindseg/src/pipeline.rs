//! Pipeline stages: prepare, train, segment, evaluate, sweep, synth.
//!
//! Expensive stages record a content hash of their inputs and settings and
//! skip work when it matches.

use std::path::{Path, PathBuf};

use blindseg_core::nn::{nn_error_signal, train_predictor, LstmNetwork, PredictorKind, SequenceRef, TrainingData};
use blindseg_core::rng::{stream, sub_seed};
use blindseg_core::synth::{synth_categorical, synth_continuous};
use blindseg_core::{
    aggregate, compute_metrics, detect_boundaries, fit_codebook, fit_markov, match_boundaries, periodic_boundaries,
    quantize, sample_frames, BoundaryKind, BoundarySet, CategoricalSequence, ErrorSignal, EvaluationReport,
    FrameSequence, MarkovModel, MatchMode, MatchResult, MfccExtractor, SweepPoint,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ModelKind, PipelineConfig, SynthKind};
use crate::corpus::{split_corpus, Corpus, GoldInfo, Source, Split, SplitSpec, SynthManifest, MANIFEST};
use crate::error::{CliError, Result};
use crate::formats;
use crate::wav::load_audio;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Computed,
    UpToDate,
}

/// Paths of every artifact under the work directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    dir: PathBuf,
}

impl Workspace {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn prepared(&self) -> PathBuf {
        self.dir.join("prepared.toml")
    }

    pub fn codebook(&self) -> PathBuf {
        self.dir.join("codebook.txt")
    }

    pub fn symbols(&self, split: Split, id: &str) -> PathBuf {
        self.dir.join("symbols").join(split.dir_name()).join(format!("{id}.txt"))
    }

    pub fn features(&self, split: Split, id: &str) -> PathBuf {
        self.dir.join("features").join(split.dir_name()).join(format!("{id}.csv"))
    }

    pub fn checkpoint(&self, kind: ModelKind) -> PathBuf {
        let file = match kind {
            ModelKind::Markov => "markov.txt",
            ModelKind::RnnCat => "rnn-cat.toml",
            ModelKind::RnnMfcc => "rnn-mfcc.toml",
        };
        self.dir.join("model").join(file)
    }

    pub fn model_key(&self, kind: ModelKind) -> PathBuf {
        self.dir.join("model").join(format!("{}.key", kind.name()))
    }

    pub fn training_report(&self, kind: ModelKind) -> PathBuf {
        self.dir.join("model").join(format!("{}_training.csv", kind.name()))
    }

    pub fn boundaries_dir(&self) -> PathBuf {
        self.dir.join("boundaries")
    }

    pub fn errors_dir(&self) -> PathBuf {
        self.dir.join("errors")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.dir.join("reports")
    }
}

/// What `prepare` produced, stored next to the artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedInfo {
    pub key: String,
    pub hop_ms: f64,
    pub n_symbols: usize,
    /// Frame dimension when real-valued features exist.
    pub frame_dim: Option<usize>,
    pub split: SplitSpec,
}

fn sha_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha_hex(&[&bytes]))
}

fn prepare_key(config: &PipelineConfig, corpus: &Corpus) -> Result<String> {
    let mut parts = vec![
        "prepare 1".to_string(),
        config.seed.to_string(),
        config.corpus.val_fraction.to_string(),
        PipelineConfig::section_key(&config.mfcc),
        PipelineConfig::section_key(&config.quantizer),
    ];
    for f in corpus.files() {
        let rel = f.strip_prefix(&corpus.root).unwrap_or(&f);
        parts.push(rel.to_string_lossy().into_owned());
        parts.push(file_hash(&f)?);
    }
    let refs: Vec<&[u8]> = parts.iter().map(|s| s.as_bytes()).collect();
    Ok(sha_hex(&refs))
}

pub fn load_prepared(ws: &Workspace) -> Result<PreparedInfo> {
    let path = ws.prepared();
    if !path.is_file() {
        return Err(CliError::MissingArtifact(path));
    }
    toml::from_str(&formats::read_text(&path)?).map_err(|e| CliError::format(&path, e.to_string()))
}

fn extract_frames(corpus: &Corpus, utt: &crate::corpus::Utterance, config: &PipelineConfig) -> Result<Option<FrameSequence>> {
    match &utt.source {
        Source::Audio { wav, .. } => {
            let audio = load_audio(wav)?;
            let extractor = MfccExtractor::new(&config.mfcc, audio.sample_rate())?;
            let seq = extractor.compute(&audio).map_err(|e| CliError::format(wav, e.to_string()))?;
            Ok(Some(seq.with_id(utt.id.clone())))
        }
        Source::Synthetic { data, .. } => {
            let m = corpus.manifest.as_ref().expect("synthetic sources come with a manifest");
            match m.kind {
                SynthKind::Frames => {
                    let seq = formats::read_frames(data, &utt.id, m.hop_ms)?;
                    if seq.dim() != m.width {
                        return Err(CliError::format(data, format!("expected {} columns, found {}", m.width, seq.dim())));
                    }
                    Ok(Some(seq))
                }
                SynthKind::Symbols => Ok(None),
            }
        }
    }
}

/// Extract features, fit the codebook on the training split and quantize
/// every utterance.
pub fn prepare(config: &PipelineConfig) -> Result<(StageStatus, PreparedInfo)> {
    let corpus = Corpus::discover(&config.corpus.root)?;
    let ws = Workspace::new(&config.corpus.work_dir);
    let key = prepare_key(config, &corpus)?;
    if let Ok(info) = load_prepared(&ws) {
        if info.key == key {
            return Ok((StageStatus::UpToDate, info));
        }
    }

    let split = split_corpus(
        &corpus.ids(Split::Train),
        &corpus.ids(Split::Test),
        config.corpus.val_fraction,
        config.seed,
    )?;
    if split.test.is_empty() {
        return Err(CliError::Corpus(format!("no test utterances under {}", corpus.root.display())));
    }

    let (hop_ms, symbol_corpus) = match &corpus.manifest {
        Some(m) => (m.hop_ms, m.kind == SynthKind::Symbols),
        None => (config.mfcc.hop_ms, false),
    };

    let info = if symbol_corpus {
        let m = corpus.manifest.as_ref().expect("checked above");
        for utt in &corpus.utterances {
            let Source::Synthetic { data, .. } = &utt.source else { unreachable!() };
            let seq = formats::read_symbols(data, &utt.id, m.width, hop_ms)?;
            formats::write_text(&ws.symbols(utt.split, &utt.id), &formats::format_symbols(&seq))?;
        }
        PreparedInfo { key, hop_ms, n_symbols: m.width, frame_dim: None, split }
    } else {
        let mut frames: Vec<(Split, FrameSequence)> = Vec::with_capacity(corpus.utterances.len());
        for utt in &corpus.utterances {
            let seq = extract_frames(&corpus, utt, config)?.expect("frame corpus");
            formats::write_text(&ws.features(utt.split, &utt.id), &formats::format_frames(seq.frames()))?;
            frames.push((utt.split, seq));
        }
        let train_frames: Vec<FrameSequence> =
            frames.iter().filter(|(s, _)| *s == Split::Train).map(|(_, f)| f.clone()).collect();
        let sample = sample_frames(&train_frames, config.quantizer.sample, sub_seed(config.seed, stream::SAMPLE))?;
        let codebook = fit_codebook(&sample, config.quantizer.k, config.quantizer.n_init, config.seed)?;
        formats::write_text(&ws.codebook(), &formats::format_codebook(&codebook))?;
        for (split, seq) in &frames {
            let symbols = quantize(&codebook, seq)?;
            if let Some(&bad) = symbols.symbols().iter().find(|&&s| s >= codebook.k()) {
                return Err(CliError::Core(blindseg_core::Error::SymbolOutOfRange { symbol: bad, n_symbols: codebook.k() }));
            }
            formats::write_text(&ws.symbols(*split, seq.utterance_id()), &formats::format_symbols(&symbols))?;
        }
        let dim = frames.first().map_or(config.mfcc.dim(), |(_, f)| f.dim());
        PreparedInfo { key, hop_ms, n_symbols: codebook.k(), frame_dim: Some(dim), split }
    };
    let text = toml::to_string(&info).expect("prepared info is representable in TOML");
    formats::write_text(&ws.prepared(), &text)?;
    Ok((StageStatus::Computed, info))
}

fn load_symbols(ws: &Workspace, info: &PreparedInfo, split: Split, ids: &[String]) -> Result<Vec<CategoricalSequence>> {
    ids.iter()
        .map(|id| {
            let path = ws.symbols(split, id);
            if !path.is_file() {
                return Err(CliError::MissingArtifact(path));
            }
            formats::read_symbols(&path, id, info.n_symbols, info.hop_ms)
        })
        .collect()
}

fn load_features(ws: &Workspace, info: &PreparedInfo, split: Split, ids: &[String]) -> Result<Vec<FrameSequence>> {
    if info.frame_dim.is_none() {
        return Err(CliError::Config("rnn-mfcc needs real-valued features; this corpus only has symbols".into()));
    }
    ids.iter()
        .map(|id| {
            let path = ws.features(split, id);
            if !path.is_file() {
                return Err(CliError::MissingArtifact(path));
            }
            formats::read_frames(&path, id, info.hop_ms)
        })
        .collect()
}

/// A trained model that can score test utterances.
pub enum Predictor {
    Markov(MarkovModel),
    Network(LstmNetwork),
}

fn train_key(config: &PipelineConfig, info: &PreparedInfo) -> String {
    sha_hex(&[
        b"train 1",
        info.key.as_bytes(),
        config.seed.to_string().as_bytes(),
        PipelineConfig::section_key(&config.model).as_bytes(),
    ])
}

/// Fit the configured model. The Markov model uses the whole training
/// split; networks hold out the validation part for early stopping.
pub fn train(config: &PipelineConfig) -> Result<StageStatus> {
    let ws = Workspace::new(&config.corpus.work_dir);
    let info = load_prepared(&ws)?;
    let kind = config.model.kind;
    let key = train_key(config, &info);
    let ckpt = ws.checkpoint(kind);
    if ckpt.is_file() && formats::read_text(&ws.model_key(kind)).ok().as_deref() == Some(key.as_str()) {
        return Ok(StageStatus::UpToDate);
    }
    let seed = sub_seed(config.seed, stream::NET_INIT);
    match kind {
        ModelKind::Markov => {
            let mut ids = info.split.train.clone();
            ids.extend(info.split.val.iter().cloned());
            ids.sort();
            let seqs = load_symbols(&ws, &info, Split::Train, &ids)?;
            let model = fit_markov(&seqs, config.model.order, config.model.alpha)?;
            formats::write_text(&ckpt, &formats::format_markov(&model))?;
        }
        ModelKind::RnnCat => {
            let train = load_symbols(&ws, &info, Split::Train, &info.split.train)?;
            let val = load_symbols(&ws, &info, Split::Train, &info.split.val)?;
            let cfg = config.model.rnn.network_config(PredictorKind::Categorical, info.n_symbols, seed);
            let (net, report) =
                train_predictor(TrainingData::Categorical(&train), TrainingData::Categorical(&val), &cfg)?;
            formats::write_text(&ckpt, &formats::format_network(&net))?;
            formats::write_text(&ws.training_report(kind), &formats::format_training_report(&report))?;
        }
        ModelKind::RnnMfcc => {
            let train = load_features(&ws, &info, Split::Train, &info.split.train)?;
            let val = load_features(&ws, &info, Split::Train, &info.split.val)?;
            let dim = info.frame_dim.expect("checked by load_features");
            let cfg = config.model.rnn.network_config(PredictorKind::Continuous, dim, seed);
            let (net, report) =
                train_predictor(TrainingData::Continuous(&train), TrainingData::Continuous(&val), &cfg)?;
            formats::write_text(&ckpt, &formats::format_network(&net))?;
            formats::write_text(&ws.training_report(kind), &formats::format_training_report(&report))?;
        }
    }
    formats::write_text(&ws.model_key(kind), &key)?;
    Ok(StageStatus::Computed)
}

pub fn load_predictor(config: &PipelineConfig) -> Result<Predictor> {
    let ws = Workspace::new(&config.corpus.work_dir);
    let kind = config.model.kind;
    let path = ws.checkpoint(kind);
    if !path.is_file() {
        return Err(CliError::MissingArtifact(path));
    }
    let text = formats::read_text(&path)?;
    Ok(match kind {
        ModelKind::Markov => Predictor::Markov(formats::parse_markov(&text, &path)?),
        _ => Predictor::Network(formats::parse_network(&text, &path)?),
    })
}

/// Zero-prefixed error signals of every test utterance, in id order.
pub fn test_error_signals(config: &PipelineConfig) -> Result<Vec<ErrorSignal>> {
    let ws = Workspace::new(&config.corpus.work_dir);
    let info = load_prepared(&ws)?;
    let predictor = load_predictor(config)?;
    let ids = &info.split.test;
    let signals: Vec<ErrorSignal> = match (&predictor, config.model.kind) {
        (Predictor::Markov(m), _) => {
            let seqs = load_symbols(&ws, &info, Split::Test, ids)?;
            check_width(m.n_symbols(), info.n_symbols)?;
            seqs.iter().map(|s| m.error_signal(s)).collect::<blindseg_core::Result<_>>()?
        }
        (Predictor::Network(net), ModelKind::RnnCat) => {
            check_width(net.config().input_dim, info.n_symbols)?;
            let seqs = load_symbols(&ws, &info, Split::Test, ids)?;
            seqs.iter().map(|s| nn_error_signal(net, SequenceRef::Categorical(s))).collect::<blindseg_core::Result<_>>()?
        }
        (Predictor::Network(net), _) => {
            let seqs = load_features(&ws, &info, Split::Test, ids)?;
            check_width(net.config().input_dim, info.frame_dim.unwrap_or(0))?;
            seqs.iter().map(|s| nn_error_signal(net, SequenceRef::Continuous(s))).collect::<blindseg_core::Result<_>>()?
        }
    };
    Ok(signals.into_iter().map(|e| e.zero_prefix(config.segment.prefix_frames)).collect())
}

fn check_width(model: usize, features: usize) -> Result<()> {
    if model != features {
        return Err(CliError::Config(format!(
            "checkpoint expects width {model} but prepared features have width {features}; rerun train"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSummary {
    pub utterances: usize,
    pub boundaries: usize,
    pub out_dir: PathBuf,
}

/// Write one boundary file per test utterance into `out_dir`.
pub fn segment(config: &PipelineConfig, delta: f64, out_dir: &Path) -> Result<SegmentSummary> {
    let ws = Workspace::new(&config.corpus.work_dir);
    let signals = test_error_signals(config)?;
    let mut total = 0;
    for e in &signals {
        let b = detect_boundaries(e, delta, config.segment.rule);
        total += b.frames.len();
        formats::write_text(&out_dir.join(format!("{}.bnd", e.utterance_id())), &formats::format_boundaries(&b))?;
        if config.segment.dump_errors {
            let path = ws.errors_dir().join(format!("{}.csv", e.utterance_id()));
            formats::write_text(&path, &formats::format_error_signal(e))?;
        }
    }
    Ok(SegmentSummary { utterances: signals.len(), boundaries: total, out_dir: out_dir.to_path_buf() })
}

fn filter_set(set: &BoundarySet, gold: &GoldInfo, config: &PipelineConfig) -> BoundarySet {
    let mut out = set.clone();
    if config.eval.drop_edges {
        out = out.without_edges(gold.duration);
    }
    if config.eval.trim_silence {
        if let Some((lo, hi)) = gold.speech_span {
            out = out.restrict(lo, hi);
        }
    }
    out
}

/// Gold boundaries of the test split after the configured filtering.
pub fn test_gold(config: &PipelineConfig, info: &PreparedInfo) -> Result<Vec<GoldInfo>> {
    let corpus = Corpus::discover(&config.corpus.root)?;
    info.split
        .test
        .iter()
        .map(|id| {
            let utt = corpus
                .get(Split::Test, id)
                .ok_or_else(|| CliError::Corpus(format!("test utterance {id} not found in the corpus")))?;
            let mut g = utt.load_gold(info.hop_ms)?;
            g.boundaries = filter_set(&g.boundaries, &g, config);
            Ok(g)
        })
        .collect()
}

/// Which hypotheses to score.
#[derive(Debug, Clone, PartialEq)]
pub enum Hypotheses {
    /// Boundary files `<id>.bnd` under a directory.
    Directory(PathBuf),
    /// A boundary every `eval.periodic_ms`.
    Periodic,
}

pub type ReportRow = (String, MatchResult, EvaluationReport);

/// Pooled metrics of the test split, one row per requested mode.
pub fn evaluate(config: &PipelineConfig, hyps: &Hypotheses, modes: &[MatchMode]) -> Result<Vec<ReportRow>> {
    let ws = Workspace::new(&config.corpus.work_dir);
    let info = load_prepared(&ws)?;
    let gold = test_gold(config, &info)?;
    let mut hyp_sets = Vec::with_capacity(gold.len());
    for (id, g) in info.split.test.iter().zip(&gold) {
        let raw = match hyps {
            Hypotheses::Directory(dir) => {
                let path = dir.join(format!("{id}.bnd"));
                if !path.is_file() {
                    return Err(CliError::MissingArtifact(path));
                }
                formats::read_boundaries(&path, BoundaryKind::Hypothesis)?
            }
            Hypotheses::Periodic => {
                let n_frames = (g.duration * 1000.0 / info.hop_ms).round() as usize;
                periodic_boundaries(n_frames, info.hop_ms, config.eval.periodic_ms)?
            }
        };
        hyp_sets.push(filter_set(&raw, g, config));
    }
    let system = match hyps {
        Hypotheses::Directory(_) => config.model.kind.name().to_string(),
        Hypotheses::Periodic => format!("periodic-{}ms", config.eval.periodic_ms),
    };
    let mut rows = Vec::new();
    for &mode in modes {
        let per_utt = gold
            .iter()
            .zip(&hyp_sets)
            .map(|(g, h)| match_boundaries(&g.boundaries, h, config.eval.tolerance_ms, mode))
            .collect::<blindseg_core::Result<Vec<_>>>()?;
        let pooled = aggregate(&per_utt)?;
        rows.push((system.clone(), pooled, compute_metrics(&pooled)?));
    }
    Ok(rows)
}

pub fn write_report(config: &PipelineConfig, name: &str, rows: &[ReportRow]) -> Result<(PathBuf, PathBuf)> {
    let dir = Workspace::new(&config.corpus.work_dir).reports_dir();
    let csv = dir.join(format!("{name}.csv"));
    let txt = dir.join(format!("{name}.txt"));
    formats::write_text(&csv, &formats::format_report_csv(rows))?;
    formats::write_text(&txt, &formats::format_report_table(rows))?;
    Ok((csv, txt))
}

/// Score the test split at every threshold of `segment.deltas`, ascending.
pub fn sweep(config: &PipelineConfig) -> Result<Vec<SweepPoint>> {
    let ws = Workspace::new(&config.corpus.work_dir);
    let info = load_prepared(&ws)?;
    let signals = test_error_signals(config)?;
    let gold = test_gold(config, &info)?;
    let mut deltas = config.segment.deltas.clone();
    deltas.sort_by(f64::total_cmp);
    let mut points = Vec::with_capacity(deltas.len());
    for delta in deltas {
        let per_utt = signals
            .iter()
            .zip(&gold)
            .map(|(e, g)| {
                let hyp = detect_boundaries(e, delta, config.segment.rule).to_seconds(BoundaryKind::Hypothesis);
                match_boundaries(&g.boundaries, &filter_set(&hyp, g, config), config.eval.tolerance_ms, config.eval.mode)
            })
            .collect::<blindseg_core::Result<Vec<_>>>()?;
        let matched = aggregate(&per_utt)?;
        points.push(SweepPoint { delta, matched, report: compute_metrics(&matched)? });
    }
    formats::write_text(&ws.reports_dir().join("sweep.csv"), &formats::format_sweep_csv(&points))?;
    Ok(points)
}

/// Generate a synthetic corpus with `synth.n_train` / `synth.n_test`
/// utterances under `out`.
pub fn synth(config: &PipelineConfig, out: &Path) -> Result<SynthManifest> {
    let s = &config.synth;
    let hop = config.mfcc.hop_ms;
    let seed = sub_seed(config.seed, stream::SYNTH);
    let mut manifest = SynthManifest {
        kind: s.kind,
        width: match s.kind {
            SynthKind::Symbols => s.n_symbols,
            SynthKind::Frames => s.dim,
        },
        hop_ms: hop,
        train: Vec::new(),
        test: Vec::new(),
    };
    for (split, n) in [(Split::Train, s.n_train), (Split::Test, s.n_test)] {
        let spec = s.spec(n, hop, seed);
        let prefix = split.dir_name();
        let dir = out.join(prefix);
        let items: Vec<(String, String, String)> = match s.kind {
            SynthKind::Symbols => synth_categorical(&spec, prefix)?
                .into_iter()
                .map(|u| (u.id, formats::format_symbols(&u.data), formats::format_boundaries(&u.gold)))
                .collect(),
            SynthKind::Frames => synth_continuous(&spec, prefix)?
                .into_iter()
                .map(|u| (u.id, formats::format_frames(u.data.frames()), formats::format_boundaries(&u.gold)))
                .collect(),
        };
        for (id, data, gold) in items {
            formats::write_text(&dir.join(format!("{id}.csv")), &data)?;
            formats::write_text(&dir.join(format!("{id}.gold")), &gold)?;
            match split {
                Split::Train => manifest.train.push(id),
                Split::Test => manifest.test.push(id),
            }
        }
    }
    let text = toml::to_string(&manifest).expect("manifest is representable in TOML");
    formats::write_text(&out.join(MANIFEST), &text)?;
    Ok(manifest)
}
