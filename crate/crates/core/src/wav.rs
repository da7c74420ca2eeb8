//! RIFF/WAV reading and writing (PCM16 and IEEE float32).

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

impl std::str::FromStr for WavEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcm16" => Ok(Self::Pcm16),
            "float32" => Ok(Self::Float32),
            other => Err(Error::UnsupportedEncoding(other.to_string())),
        }
    }
}

/// Outcome of [`save_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SaveReport {
    /// Samples outside [-1, 1] that were hard-limited (PCM16 only).
    pub limited: usize,
}

fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Wav {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Reads a WAV file, averaging channels to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels.max(1));
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (fmt, bits) => {
            let kind = match fmt {
                SampleFormat::Int => "integer PCM",
                SampleFormat::Float => "IEEE float",
            };
            return Err(Error::UnsupportedEncoding(format!(
                "{bits}-bit {kind} in {} (supported: 16-bit PCM, 32-bit float)",
                path.display()
            )));
        }
    };
    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    Signal::new(mono, spec.sample_rate).map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes a mono WAV file. PCM16 output hard-limits samples to [-1, 1]
/// and logs a warning when that happens.
pub fn save_wav(signal: &Signal, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<SaveReport> {
    let path = path.as_ref();
    let (bits, format) = match encoding {
        WavEncoding::Pcm16 => (16, SampleFormat::Int),
        WavEncoding::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: bits,
        sample_format: format,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    let mut report = SaveReport::default();
    for &v in signal.samples() {
        match encoding {
            WavEncoding::Pcm16 => {
                if !(-1.0..=1.0).contains(&v) {
                    report.limited += 1;
                }
                let q = (v.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(q).map_err(|e| wav_err(path, e))?;
            }
            WavEncoding::Float32 => writer.write_sample(v as f32).map_err(|e| wav_err(path, e))?,
        }
    }
    writer.finalize().map_err(|e| wav_err(path, e))?;
    if report.limited > 0 {
        log::warn!(
            "{}: {} sample(s) outside [-1, 1] were hard-limited for PCM16",
            path.display(),
            report.limited
        );
    }
    Ok(report)
}
