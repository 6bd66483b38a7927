//! Pipeline configuration: one TOML file with a section per stage. Every
//! field has a default, so an empty file selects the reference setup.

use std::path::{Path, PathBuf};

use blindseg_core::nn::{NetworkConfig, PredictorKind};
use blindseg_core::quantizer::{DEFAULT_K, DEFAULT_N_INIT, DEFAULT_SAMPLE};
use blindseg_core::synth::SynthSpec;
use blindseg_core::{MatchMode, MfccConfig, PeakRule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Global seed; every random stage derives its own stream from it.
    pub seed: u64,
    pub corpus: CorpusSection,
    pub mfcc: MfccConfig,
    pub quantizer: QuantizerSection,
    pub model: ModelSection,
    pub segment: SegmentSection,
    pub eval: EvalSection,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub root: PathBuf,
    /// Where prepared features, models, boundaries and reports go.
    pub work_dir: PathBuf,
    /// Fraction of the training split held out for early stopping.
    pub val_fraction: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self { root: PathBuf::from("corpus"), work_dir: PathBuf::from("work"), val_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerSection {
    pub k: usize,
    pub n_init: usize,
    /// Frames sampled from the training split to fit the codebook.
    pub sample: usize,
}

impl Default for QuantizerSection {
    fn default() -> Self {
        Self { k: DEFAULT_K, n_init: DEFAULT_N_INIT, sample: DEFAULT_SAMPLE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Markov,
    RnnCat,
    RnnMfcc,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Markov => "markov",
            Self::RnnCat => "rnn-cat",
            Self::RnnMfcc => "rnn-mfcc",
        }
    }

    pub fn is_categorical(self) -> bool {
        self != Self::RnnMfcc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub order: usize,
    pub alpha: f64,
    pub rnn: RnnSection,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::Markov,
            order: blindseg_core::markov::DEFAULT_ORDER,
            alpha: blindseg_core::markov::DEFAULT_ALPHA,
            rnn: RnnSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RnnSection {
    pub hidden_dim_cat: usize,
    pub hidden_dim_mfcc: usize,
    pub n_layers: usize,
    pub dropout_p: f64,
    pub skip_prob: f64,
    pub bptt_len: usize,
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Standardize MFCC inputs per dimension (continuous model only).
    pub standardize: bool,
}

impl Default for RnnSection {
    fn default() -> Self {
        let cat = NetworkConfig::categorical(DEFAULT_K);
        Self {
            hidden_dim_cat: cat.hidden_dim,
            hidden_dim_mfcc: NetworkConfig::continuous(13).hidden_dim,
            n_layers: cat.n_layers,
            dropout_p: cat.dropout_p,
            skip_prob: cat.skip_prob,
            bptt_len: cat.bptt_len,
            lr: cat.lr,
            rho: cat.rho,
            eps: cat.eps,
            max_epochs: cat.max_epochs,
            patience: cat.patience,
            standardize: true,
        }
    }
}

impl RnnSection {
    pub fn network_config(&self, kind: PredictorKind, input_dim: usize, seed: u64) -> NetworkConfig {
        let (base, hidden, skip, standardize) = match kind {
            PredictorKind::Categorical => {
                (NetworkConfig::categorical(input_dim), self.hidden_dim_cat, self.skip_prob, false)
            }
            PredictorKind::Continuous => {
                (NetworkConfig::continuous(input_dim), self.hidden_dim_mfcc, 0.0, self.standardize)
            }
        };
        NetworkConfig {
            hidden_dim: hidden,
            n_layers: self.n_layers,
            dropout_p: self.dropout_p,
            skip_prob: skip,
            bptt_len: self.bptt_len,
            lr: self.lr,
            rho: self.rho,
            eps: self.eps,
            seed,
            max_epochs: self.max_epochs,
            patience: self.patience,
            standardize,
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentSection {
    /// Peak threshold used by `segment`.
    pub delta: f64,
    /// Thresholds visited by `sweep`.
    pub deltas: Vec<f64>,
    pub rule: PeakRule,
    /// Leading error frames forced to zero.
    pub prefix_frames: usize,
    /// Also write per-utterance error signals.
    pub dump_errors: bool,
}

impl Default for SegmentSection {
    fn default() -> Self {
        Self {
            delta: 0.5,
            deltas: (0..=30).map(|i| f64::from(i) / 10.0).collect(),
            rule: PeakRule::default(),
            prefix_frames: blindseg_core::segment::PREFIX_FRAMES,
            dump_errors: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub mode: MatchMode,
    pub tolerance_ms: f64,
    /// Drop gold boundaries at the very start and end of each utterance.
    pub drop_edges: bool,
    /// Score only between the leading and trailing silence labels.
    pub trim_silence: bool,
    /// Spacing of the periodic baseline.
    pub periodic_ms: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            mode: MatchMode::Cropped,
            tolerance_ms: blindseg_core::eval::DEFAULT_TOLERANCE_MS,
            drop_edges: true,
            trim_silence: false,
            periodic_ms: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Symbol streams with per-segment categorical distributions.
    Symbols,
    /// Real-valued frames with per-segment Gaussians.
    Frames,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub kind: SynthKind,
    pub n_train: usize,
    pub n_test: usize,
    pub min_segments: usize,
    pub max_segments: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub n_symbols: usize,
    pub n_phones: usize,
    pub peak_mass: f64,
    pub dim: usize,
    pub mean_spread: f64,
    pub noise_std: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthSpec::default();
        Self {
            kind: SynthKind::Symbols,
            n_train: 200,
            n_test: 50,
            min_segments: s.min_segments,
            max_segments: s.max_segments,
            min_len: s.min_len,
            max_len: s.max_len,
            n_symbols: s.n_symbols,
            n_phones: s.n_phones,
            peak_mass: s.peak_mass,
            dim: s.dim,
            mean_spread: s.mean_spread,
            noise_std: s.noise_std,
        }
    }
}

impl SynthSection {
    pub fn spec(&self, n_utterances: usize, hop_ms: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            n_utterances,
            min_segments: self.min_segments,
            max_segments: self.max_segments,
            min_len: self.min_len,
            max_len: self.max_len,
            n_symbols: self.n_symbols,
            n_phones: self.n_phones,
            peak_mass: self.peak_mass,
            dim: self.dim,
            mean_spread: self.mean_spread,
            noise_std: self.noise_std,
            hop_ms,
            seed,
        }
    }
}

impl PipelineConfig {
    /// Parse a TOML document and apply `section.key=value` overrides.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Self = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_with(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.mfcc.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(0.0..1.0).contains(&self.corpus.val_fraction) {
            return bad(format!("corpus.val_fraction must lie in [0, 1), got {}", self.corpus.val_fraction));
        }
        if self.quantizer.k < 2 || self.quantizer.n_init == 0 || self.quantizer.sample == 0 {
            return bad("quantizer needs k >= 2, n_init >= 1 and sample >= 1".into());
        }
        if self.model.order == 0 || !(self.model.alpha > 0.0) {
            return bad("model.order must be >= 1 and model.alpha > 0".into());
        }
        if !(self.segment.delta >= 0.0) || self.segment.deltas.iter().any(|d| !(*d >= 0.0)) {
            return bad("segment thresholds must be nonnegative".into());
        }
        if self.segment.deltas.is_empty() {
            return bad("segment.deltas must not be empty".into());
        }
        if !(self.eval.tolerance_ms >= 0.0) || !(self.eval.periodic_ms > 0.0) {
            return bad("eval.tolerance_ms must be >= 0 and eval.periodic_ms > 0".into());
        }
        for kind in [PredictorKind::Categorical, PredictorKind::Continuous] {
            self.model
                .rnn
                .network_config(kind, 8, self.seed)
                .validate()
                .map_err(|e| CliError::Config(format!("model.rnn: {e}")))?;
        }
        self.synth
            .spec(1, self.mfcc.hop_ms, self.seed)
            .validate()
            .map_err(|e| CliError::Config(format!("synth: {e}")))?;
        Ok(())
    }

    /// Stable serialization of one section, for cache keys.
    pub fn section_key<T: Serialize>(section: &T) -> String {
        toml::to_string(section).expect("section is representable in TOML")
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("split yields at least one piece");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?}: {p} is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
