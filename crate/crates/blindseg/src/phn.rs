//! TIMIT-style phone annotations: `start end label` per line, in samples.

use std::path::Path;

use blindseg_core::{BoundaryKind, BoundarySet};

use crate::error::{CliError, Result};

const SILENCE: &str = "h#";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhoneSegment {
    pub start: u64,
    pub end: u64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhoneAnnotation {
    pub segments: Vec<PhoneSegment>,
    pub sample_rate: u32,
}

impl PhoneAnnotation {
    fn secs(&self, samples: u64) -> f64 {
        samples as f64 / f64::from(self.sample_rate)
    }

    /// Every segment start plus the final end, in seconds.
    pub fn boundaries(&self) -> BoundarySet {
        let mut times: Vec<f64> = self.segments.iter().map(|s| self.secs(s.start)).collect();
        if let Some(last) = self.segments.last() {
            times.push(self.secs(last.end));
        }
        BoundarySet::new(times, BoundaryKind::Gold).expect("contiguous segments give increasing times")
    }

    pub fn labels(&self) -> Vec<&str> {
        self.segments.iter().map(|s| s.label.as_str()).collect()
    }

    /// Span between the leading and trailing silence labels, in seconds.
    pub fn speech_span(&self) -> Option<(f64, f64)> {
        let first = self.segments.first()?;
        let last = self.segments.last()?;
        let start = if first.label == SILENCE { first.end } else { first.start };
        let end = if last.label == SILENCE && self.segments.len() > 1 { last.start } else { last.end };
        Some((self.secs(start), self.secs(end)))
    }
}

pub fn parse_phn(text: &str, sample_rate: u32, path: &Path) -> Result<PhoneAnnotation> {
    let mut segments: Vec<PhoneSegment> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [start, end, label] = fields[..] else {
            return Err(CliError::parse(path, lineno, "expected `start end label`"));
        };
        let num = |s: &str| s.parse::<u64>().map_err(|_| CliError::parse(path, lineno, format!("bad sample index {s:?}")));
        let (start, end) = (num(start)?, num(end)?);
        if end <= start {
            return Err(CliError::parse(path, lineno, "segment end must follow its start"));
        }
        if let Some(prev) = segments.last() {
            if start != prev.end {
                let what = if start < prev.end { "overlaps" } else { "leaves a gap after" };
                return Err(CliError::parse(path, lineno, format!("segment {what} the previous one")));
            }
        }
        segments.push(PhoneSegment { start, end, label: label.to_string() });
    }
    Ok(PhoneAnnotation { segments, sample_rate })
}

pub fn read_phn(path: &Path, sample_rate: u32) -> Result<PhoneAnnotation> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_phn(&text, sample_rate, path)
}

pub fn format_phn(annotation: &PhoneAnnotation) -> String {
    annotation.segments.iter().map(|s| format!("{} {} {}\n", s.start, s.end, s.label)).collect()
}

pub fn write_phn(path: &Path, annotation: &PhoneAnnotation) -> Result<()> {
    std::fs::write(path, format_phn(annotation)).map_err(|e| CliError::io(path, e))
}
