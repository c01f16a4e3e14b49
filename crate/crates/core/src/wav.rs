//! WAV input/output for PCM-16 and IEEE-float32 files.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::signal::MultichannelSignal;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

/// Reads a PCM-16 or float32 WAV file of any channel count.
pub fn read_wav(path: &Path) -> Result<MultichannelSignal> {
    let reader = WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("unsupported sample format {fmt:?}/{bits} bit"),
            })
        }
    };
    if channels == 0 || interleaved.len() % channels != 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: "sample count is not a multiple of the channel count".into(),
        });
    }
    let frames = interleaved.len() / channels;
    let mut data = vec![Vec::with_capacity(frames); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (c, &v) in frame.iter().enumerate() {
            data[c].push(v);
        }
    }
    MultichannelSignal::new(spec.sample_rate, data)
}

/// Reads a WAV file and checks its sample rate.
pub fn read_wav_at(path: &Path, sample_rate: u32) -> Result<MultichannelSignal> {
    let sig = read_wav(path)?;
    if sig.sample_rate() != sample_rate {
        return Err(Error::SampleRateMismatch(sig.sample_rate(), sample_rate));
    }
    Ok(sig)
}

/// Writes a WAV file through a temporary sibling, renaming it into place.
///
/// PCM-16 samples are clipped to `[-1, 1)`.
pub fn write_wav(path: &Path, signal: &MultichannelSignal, encoding: WavEncoding) -> Result<()> {
    let spec = WavSpec {
        channels: signal.num_channels() as u16,
        sample_rate: signal.sample_rate(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut writer = WavWriter::create(&tmp, spec)?;
        for v in signal.interleaved() {
            match encoding {
                WavEncoding::Pcm16 => {
                    let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(q)?;
                }
                WavEncoding::Float32 => writer.write_sample(v as f32)?,
            }
        }
        writer.finalize()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
