//! Mono WAV input/output. Multichannel files are down-mixed by averaging.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{DeclipError, Result};
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

impl WavFormat {
    /// Rounds a threshold onto the grid of representable sample values so
    /// that clipping and re-reading the file give exactly `±tau`.
    pub fn quantize(self, value: f64) -> f64 {
        match self {
            WavFormat::Pcm16 => (value * 32768.0).round().clamp(-32768.0, 32767.0) / 32768.0,
            WavFormat::Float32 => value as f32 as f64,
        }
    }
}

impl std::str::FromStr for WavFormat {
    type Err = DeclipError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pcm16" | "int16" | "i16" => Ok(WavFormat::Pcm16),
            "float32" | "f32" => Ok(WavFormat::Float32),
            other => Err(DeclipError::Config(format!("unknown wav format '{other}'"))),
        }
    }
}

pub struct WavData {
    pub signal: Signal,
    pub format: WavFormat,
    pub channels: u16,
}

pub fn read_wav(path: &Path) -> Result<WavData> {
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let (interleaved, format): (Vec<f64>, WavFormat) = match spec.sample_format {
        SampleFormat::Float => (
            reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()?,
            WavFormat::Float32,
        ),
        SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            (
                reader
                    .samples::<i32>()
                    .map(|s| s.map(|v| v as f64 / scale))
                    .collect::<std::result::Result<_, _>>()?,
                WavFormat::Pcm16,
            )
        }
    };
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks(channels)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    };
    Ok(WavData {
        signal: Signal::new(samples, spec.sample_rate)?,
        format,
        channels: spec.channels,
    })
}

/// Writes a mono file. 16-bit output saturates at the integer range.
pub fn write_wav(path: &Path, signal: &Signal, format: WavFormat) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &v in signal.samples() {
        match format {
            WavFormat::Pcm16 => {
                let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(q)?;
            }
            WavFormat::Float32 => writer.write_sample(v as f32)?,
        }
    }
    writer.finalize()?;
    Ok(())
}
