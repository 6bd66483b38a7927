//! Audio container and the MFCC front end.
//!
//! Frames are 12 mel-cepstral coefficients (DCT-II of 26 log mel energies,
//! coefficients 1..=12) followed by the log energy of the windowed frame.
//! The analysis uses pre-emphasis over the whole signal, a Hamming window,
//! and drops the trailing partial window.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft;
use crate::math;
use crate::matrix::Matrix;

/// Mono audio, samples normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidAudio("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::InvalidAudio(alloc::format!(
                "sample {i} is not finite or exceeds full scale"
            )));
        }
        Ok(Self { samples, sample_rate })
    }

    /// Scale 16-bit PCM by 1/32768.
    pub fn from_pcm16(samples: &[i16], sample_rate: u32) -> Result<Self> {
        Self::new(samples.iter().map(|&s| f64::from(s) / 32768.0).collect(), sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_cepstra: usize,
    pub include_energy: bool,
    pub n_mel_filters: usize,
    pub pre_emphasis: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            window_ms: 25.0,
            hop_ms: 10.0,
            n_cepstra: 12,
            include_energy: true,
            n_mel_filters: 26,
            pre_emphasis: 0.97,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn dim(&self) -> usize {
        self.n_cepstra + usize::from(self.include_energy)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.window_ms > 0.0 && self.hop_ms > 0.0) {
            return bad("window_ms and hop_ms must be positive");
        }
        if self.hop_ms > self.window_ms {
            return bad("hop_ms must not exceed window_ms");
        }
        if self.n_mel_filters == 0 || self.n_cepstra >= self.n_mel_filters {
            return bad("n_cepstra must be smaller than n_mel_filters");
        }
        if self.dim() == 0 {
            return bad("feature dimension is zero");
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive");
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return bad("pre_emphasis must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        math::round(self.window_ms * f64::from(sample_rate) / 1000.0) as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        math::round(self.hop_ms * f64::from(sample_rate) / 1000.0) as usize
    }
}

/// Time-major feature matrix for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Matrix,
    hop_ms: f64,
    utterance_id: String,
}

impl FrameSequence {
    pub fn new(utterance_id: impl Into<String>, frames: Matrix, hop_ms: f64) -> Result<Self> {
        if !frames.is_finite() {
            return Err(Error::InvalidAudio("non-finite feature value".into()));
        }
        if !(hop_ms > 0.0) {
            return Err(Error::InvalidConfig("hop_ms must be positive".into()));
        }
        Ok(Self { frames, hop_ms, utterance_id: utterance_id.into() })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.utterance_id = id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        self.frames.row(t)
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    pub fn hop_ms(&self) -> f64 {
        self.hop_ms
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }
}

/// Reusable MFCC analyzer for one sample rate: holds the window, filterbank,
/// DCT basis and FFT plan.
pub struct MfccExtractor {
    config: MfccConfig,
    sample_rate: u32,
    window_len: usize,
    hop_len: usize,
    window: Vec<f64>,
    fft: Fft,
    // (first bin, weights) per mel filter
    filters: Vec<(usize, Vec<f64>)>,
    // n_cepstra rows of n_mel_filters, for coefficients 1..=n_cepstra
    dct: Vec<f64>,
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * math::log10(1.0 + hz / 700.0)
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (math::powf(10.0, mel / 2595.0) - 1.0)
}

impl MfccExtractor {
    pub fn new(config: &MfccConfig, sample_rate: u32) -> Result<Self> {
        config.validate()?;
        if sample_rate == 0 {
            return Err(Error::InvalidAudio("sample rate must be positive".into()));
        }
        let window_len = config.window_samples(sample_rate);
        let hop_len = config.hop_samples(sample_rate);
        if window_len < 2 || hop_len == 0 {
            return Err(Error::InvalidConfig("window or hop rounds to too few samples".into()));
        }
        let n_fft = window_len.next_power_of_two();
        let window = (0..window_len)
            .map(|n| {
                0.54 - 0.46 * math::cos(core::f64::consts::TAU * n as f64 / (window_len - 1) as f64)
            })
            .collect();

        let n_bins = n_fft / 2 + 1;
        let nyquist = f64::from(sample_rate) / 2.0;
        let mel_hi = hz_to_mel(nyquist);
        let n_mel = config.n_mel_filters;
        let edges: Vec<f64> =
            (0..n_mel + 2).map(|j| mel_to_hz(mel_hi * j as f64 / (n_mel + 1) as f64)).collect();
        let bin_hz = |k: usize| k as f64 * f64::from(sample_rate) / n_fft as f64;
        let filters = (0..n_mel)
            .map(|m| {
                let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let weights: Vec<(usize, f64)> = (0..n_bins)
                    .filter_map(|k| {
                        let f = bin_hz(k);
                        let w = if f > lo && f <= center {
                            (f - lo) / (center - lo)
                        } else if f > center && f < hi {
                            (hi - f) / (hi - center)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                let first = weights.first().map_or(0, |&(k, _)| k);
                (first, weights.into_iter().map(|(_, w)| w).collect())
            })
            .collect();

        let scale = math::sqrt(2.0 / n_mel as f64);
        let mut dct = Vec::with_capacity(config.n_cepstra * n_mel);
        for k in 1..=config.n_cepstra {
            for n in 0..n_mel {
                dct.push(
                    scale
                        * math::cos(
                            core::f64::consts::PI * k as f64 * (2 * n + 1) as f64 / (2 * n_mel) as f64,
                        ),
                );
            }
        }

        Ok(Self {
            config: config.clone(),
            sample_rate,
            window_len,
            hop_len,
            window,
            fft: Fft::new(n_fft),
            filters,
            dct,
        })
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.window_len {
            0
        } else {
            (n_samples - self.window_len) / self.hop_len + 1
        }
    }

    pub fn compute(&self, signal: &AudioSignal) -> Result<FrameSequence> {
        if signal.sample_rate() != self.sample_rate {
            return Err(Error::InvalidAudio(alloc::format!(
                "extractor built for {} Hz, signal is {} Hz",
                self.sample_rate,
                signal.sample_rate()
            )));
        }
        let x = signal.samples();
        if x.len() < self.window_len {
            return Err(Error::UtteranceTooShort { samples: x.len(), window: self.window_len });
        }
        let a = self.config.pre_emphasis;
        let emphasized: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(n, &v)| if n == 0 { v } else { v - a * x[n - 1] })
            .collect();

        let n_frames = self.n_frames(x.len());
        let dim = self.config.dim();
        let n_mel = self.config.n_mel_filters;
        let floor = self.config.log_floor;
        let mut out = Matrix::zeros(n_frames, dim);
        let mut frame = alloc::vec![0.0; self.window_len];
        let mut power = alloc::vec![0.0; self.fft_bins()];
        let mut log_mel = alloc::vec![0.0; n_mel];
        let (mut re, mut im) = (Vec::new(), Vec::new());

        for t in 0..n_frames {
            let start = t * self.hop_len;
            for (n, f) in frame.iter_mut().enumerate() {
                *f = emphasized[start + n] * self.window[n];
            }
            self.fft.power_spectrum(&frame, &mut re, &mut im, &mut power);
            let n_fft = self.fft_bins() * 2 - 2;
            for (m, (first, weights)) in self.filters.iter().enumerate() {
                let e: f64 =
                    weights.iter().enumerate().map(|(j, w)| w * power[first + j]).sum::<f64>()
                        / n_fft as f64;
                log_mel[m] = math::ln(e.max(floor));
            }
            let row = out.row_mut(t);
            for k in 0..self.config.n_cepstra {
                let basis = &self.dct[k * n_mel..(k + 1) * n_mel];
                row[k] = basis.iter().zip(&log_mel).map(|(b, l)| b * l).sum();
            }
            if self.config.include_energy {
                let energy: f64 = frame.iter().map(|v| v * v).sum();
                row[self.config.n_cepstra] = math::ln(energy.max(floor));
            }
        }
        FrameSequence::new(String::new(), out, self.config.hop_ms)
    }

    fn fft_bins(&self) -> usize {
        self.window_len.next_power_of_two() / 2 + 1
    }
}

/// One-shot MFCC computation. The returned sequence has an empty id.
pub fn compute_mfcc(signal: &AudioSignal, config: &MfccConfig) -> Result<FrameSequence> {
    MfccExtractor::new(config, signal.sample_rate())?.compute(signal)
}
