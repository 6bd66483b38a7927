//! RIFF WAV input and output.

use std::path::Path;

use blindseg_core::AudioSignal;
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{CliError, Result};

fn open_error(path: &Path, e: hound::Error) -> CliError {
    match e {
        hound::Error::IoError(io) => CliError::io(path, io),
        other => CliError::format(path, format!("not a readable WAV file: {other}")),
    }
}

/// Load a mono WAV file as samples in [-1, 1]. Integer PCM of 8 to 32 bits
/// and 32-bit float are accepted.
pub fn load_audio(path: &Path) -> Result<AudioSignal> {
    let mut reader = WavReader::open(path).map_err(|e| open_error(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(CliError::format(path, format!("unsupported channel count {} (expected mono)", spec.channels)));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, bits @ 8..=32) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<Result<_, _>>()
                .map_err(|e| open_error(path, e))?
        }
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| f64::from(v).clamp(-1.0, 1.0)))
            .collect::<Result<_, _>>()
            .map_err(|e| open_error(path, e))?,
        (format, bits) => {
            return Err(CliError::format(path, format!("unsupported encoding: {bits}-bit {format:?}")));
        }
    };
    AudioSignal::new(samples, spec.sample_rate).map_err(|e| CliError::format(path, e.to_string()))
}

/// Write mono 16-bit PCM, clipping to the representable range.
pub fn write_pcm16(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: SampleFormat::Int };
    let mut writer = WavWriter::create(path, spec).map_err(|e| open_error(path, e))?;
    for &s in samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| open_error(path, e))?;
    }
    writer.finalize().map_err(|e| open_error(path, e))
}
