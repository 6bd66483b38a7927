//! Corpus discovery, splits and gold annotations.
//!
//! Two layouts are understood. A speech corpus has `train/` and `test/`
//! trees (any letter case, any depth) of paired `<id>.wav` / `<id>.phn`
//! files. A synthetic corpus has a `manifest.toml` and per-utterance
//! `<split>/<id>.csv` data files with `<split>/<id>.gold` boundary files.

use std::path::{Path, PathBuf};

use blindseg_core::rng::{seeded, stream, sub_seed};
use blindseg_core::{BoundaryKind, BoundarySet};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::SynthKind;
use crate::error::{CliError, Result};
use crate::formats;
use crate::phn::read_phn;

pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthManifest {
    pub kind: SynthKind,
    /// Alphabet size (symbol corpora) or frame dimension (frame corpora).
    pub width: usize,
    pub hop_ms: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Audio { wav: PathBuf, phn: Option<PathBuf> },
    Synthetic { data: PathBuf, gold: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub split: Split,
    pub source: Source,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub manifest: Option<SynthManifest>,
    /// Sorted by (split, id).
    pub utterances: Vec<Utterance>,
}

/// Gold boundaries of one utterance with what is needed to filter them.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldInfo {
    pub boundaries: BoundarySet,
    pub duration: f64,
    pub speech_span: Option<(f64, f64)>,
}

fn find_dir_ci(parent: &Path, name: &str) -> Option<PathBuf> {
    std::fs::read_dir(parent)
        .ok()?
        .filter_map(|e| e.ok())
        .find(|e| e.path().is_dir() && e.file_name().to_string_lossy().eq_ignore_ascii_case(name))
        .map(|e| e.path())
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e.to_string_lossy().eq_ignore_ascii_case(ext))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn audio_utterances(split_dir: &Path, split: Split) -> Result<Vec<Utterance>> {
    let mut files = Vec::new();
    walk(split_dir, &mut files)?;
    files.sort();
    let mut out = Vec::new();
    for wav in files.iter().filter(|p| has_ext(p, "wav")) {
        let stem = wav.with_extension("");
        let phn = files.iter().find(|p| has_ext(p, "phn") && p.with_extension("") == stem).cloned();
        let rel = stem.strip_prefix(split_dir).unwrap_or(&stem);
        let id = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        out.push(Utterance { id, split, source: Source::Audio { wav: wav.clone(), phn } });
    }
    Ok(out)
}

impl Corpus {
    pub fn discover(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(CliError::Corpus(format!("corpus root {} is not a directory", root.display())));
        }
        let manifest_path = root.join(MANIFEST);
        let (manifest, mut utterances) = if manifest_path.is_file() {
            let text = formats::read_text(&manifest_path)?;
            let m: SynthManifest =
                toml::from_str(&text).map_err(|e| CliError::format(&manifest_path, e.to_string()))?;
            let mut utts = Vec::new();
            for (split, ids) in [(Split::Train, &m.train), (Split::Test, &m.test)] {
                for id in ids {
                    let base = root.join(split.dir_name());
                    utts.push(Utterance {
                        id: id.clone(),
                        split,
                        source: Source::Synthetic {
                            data: base.join(format!("{id}.csv")),
                            gold: base.join(format!("{id}.gold")),
                        },
                    });
                }
            }
            (Some(m), utts)
        } else {
            let mut utts = Vec::new();
            for split in [Split::Train, Split::Test] {
                if let Some(dir) = find_dir_ci(root, split.dir_name()) {
                    utts.extend(audio_utterances(&dir, split)?);
                }
            }
            (None, utts)
        };
        if utterances.is_empty() {
            return Err(CliError::Corpus(format!("no utterances found under {}", root.display())));
        }
        utterances.sort_by(|a, b| (a.split, &a.id).cmp(&(b.split, &b.id)));
        Ok(Self { root: root.to_path_buf(), manifest, utterances })
    }

    pub fn ids(&self, split: Split) -> Vec<String> {
        self.utterances.iter().filter(|u| u.split == split).map(|u| u.id.clone()).collect()
    }

    pub fn get(&self, split: Split, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.split == split && u.id == id)
    }

    /// Every file the corpus is read from, in a fixed order.
    pub fn files(&self) -> Vec<PathBuf> {
        let mut out: Vec<PathBuf> = self.manifest.iter().map(|_| self.root.join(MANIFEST)).collect();
        for u in &self.utterances {
            match &u.source {
                Source::Audio { wav, phn } => {
                    out.push(wav.clone());
                    out.extend(phn.clone());
                }
                Source::Synthetic { data, gold } => {
                    out.push(data.clone());
                    out.push(gold.clone());
                }
            }
        }
        out
    }
}

impl Utterance {
    pub fn load_gold(&self, hop_ms: f64) -> Result<GoldInfo> {
        match &self.source {
            Source::Audio { wav, phn } => {
                let phn = phn
                    .as_ref()
                    .ok_or_else(|| CliError::Corpus(format!("no .phn annotation next to {}", wav.display())))?;
                let reader = hound::WavReader::open(wav)
                    .map_err(|e| CliError::format(wav, format!("not a readable WAV file: {e}")))?;
                let sr = reader.spec().sample_rate;
                let duration = f64::from(reader.duration()) / f64::from(sr);
                let ann = read_phn(phn, sr)?;
                Ok(GoldInfo { boundaries: ann.boundaries(), duration, speech_span: ann.speech_span() })
            }
            Source::Synthetic { data, gold } => {
                let text = formats::read_text(data)?;
                let n_frames = text.lines().filter(|l| !l.trim().is_empty()).count();
                Ok(GoldInfo {
                    boundaries: formats::read_boundaries(gold, BoundaryKind::Gold)?,
                    duration: n_frames as f64 * hop_ms / 1000.0,
                    speech_span: None,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Hold out a seeded random `val_fraction` of the training ids (at least
/// one when the fraction is positive and two or more ids exist).
pub fn split_corpus(train_ids: &[String], test_ids: &[String], val_fraction: f64, seed: u64) -> Result<SplitSpec> {
    if train_ids.is_empty() {
        return Err(CliError::Corpus("training split is empty".into()));
    }
    let mut shuffled = train_ids.to_vec();
    shuffled.sort();
    shuffled.shuffle(&mut seeded(sub_seed(seed, stream::SPLIT)));
    let n = shuffled.len();
    let mut n_val = (n as f64 * val_fraction).round() as usize;
    if val_fraction > 0.0 && n >= 2 {
        n_val = n_val.clamp(1, n - 1);
    }
    let mut val = shuffled.split_off(n - n_val);
    shuffled.sort();
    val.sort();
    let mut test = test_ids.to_vec();
    test.sort();
    Ok(SplitSpec { train: shuffled, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("u{i:03}")).collect()
    }

    #[test]
    fn ninety_ten() {
        let s = split_corpus(&ids(100), &[], 0.1, 7).unwrap();
        assert_eq!((s.train.len(), s.val.len()), (90, 10));
        assert_eq!(s, split_corpus(&ids(100), &[], 0.1, 7).unwrap());
        assert_ne!(s.val, split_corpus(&ids(100), &[], 0.1, 8).unwrap().val);
        assert!(s.val.iter().all(|v| !s.train.contains(v)));
        assert!(split_corpus(&[], &[], 0.1, 0).is_err());
    }

    #[test]
    fn discovers_mixed_case_layout() {
        let dir = tempfile::tempdir().unwrap();
        let spk = dir.path().join("TRAIN/DR1/FCJF0");
        std::fs::create_dir_all(&spk).unwrap();
        let test = dir.path().join("test/dr2/mabc0");
        std::fs::create_dir_all(&test).unwrap();
        crate::wav::write_pcm16(&spk.join("SA1.WAV"), &[0.0; 800], 16000).unwrap();
        std::fs::write(spk.join("SA1.PHN"), "0 400 h#\n400 800 a\n").unwrap();
        crate::wav::write_pcm16(&test.join("si1.wav"), &[0.0; 1600], 16000).unwrap();
        std::fs::write(test.join("si1.phn"), "0 800 h#\n800 1200 b\n1200 1600 h#\n").unwrap();

        let c = Corpus::discover(dir.path()).unwrap();
        assert_eq!(c.ids(Split::Train), ["DR1/FCJF0/SA1"]);
        assert_eq!(c.ids(Split::Test), ["dr2/mabc0/si1"]);
        let g = c.get(Split::Test, "dr2/mabc0/si1").unwrap().load_gold(10.0).unwrap();
        assert_eq!(g.boundaries.times(), &[0.0, 0.05, 0.075, 0.1]);
        assert_eq!(g.duration, 0.1);
        assert_eq!(g.speech_span, Some((0.05, 0.075)));
        assert_eq!(c.files().len(), 4);
    }

    #[test]
    fn empty_or_missing_root() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(Corpus::discover(dir.path()), Err(CliError::Corpus(_))));
        assert!(matches!(Corpus::discover(&dir.path().join("nope")), Err(CliError::Corpus(_))));
    }
}
