//! RIFF/WAVE decoding (PCM16, float32) and encoding.

use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioClip, SignalError};

fn map_hound(e: hound::Error) -> SignalError {
    match e {
        hound::Error::FormatError(m) => SignalError::MalformedHeader(m.to_string()),
        hound::Error::Unsupported => SignalError::UnsupportedCodec("format tag not PCM or IEEE float".into()),
        hound::Error::IoError(e) => SignalError::MalformedHeader(e.to_string()),
        other => SignalError::MalformedHeader(other.to_string()),
    }
}

/// Decodes to mono: PCM16 values are divided by 32768, channels are averaged.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, SignalError> {
    let mut reader = WavReader::new(Cursor::new(bytes)).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.channels == 0 {
        return Err(SignalError::MalformedHeader("zero channels".into()));
    }
    if spec.sample_rate == 0 {
        return Err(SignalError::MalformedHeader("zero sample rate".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(SignalError::UnsupportedCodec(format!(
                "{bits}-bit {}",
                if fmt == SampleFormat::Int { "integer PCM" } else { "float" }
            )))
        }
    };
    let ch = spec.channels as usize;
    if interleaved.len() < ch {
        return Err(SignalError::EmptyData);
    }
    let samples = interleaved
        .chunks_exact(ch)
        .map(|frame| frame.iter().sum::<f64>() / ch as f64)
        .collect();
    Ok(AudioClip::new(samples, spec.sample_rate))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    #[default]
    Pcm16,
    Float32,
}

/// Mono encoding; PCM16 clips to [−1, 1) and rounds to the nearest step.
pub fn encode_wav(clip: &AudioClip, encoding: WavEncoding) -> Result<Vec<u8>, SignalError> {
    if clip.sample_rate == 0 {
        return Err(SignalError::InvalidRate);
    }
    let spec = match encoding {
        WavEncoding::Pcm16 => WavSpec {
            channels: 1,
            sample_rate: clip.sample_rate,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        },
        WavEncoding::Float32 => WavSpec {
            channels: 1,
            sample_rate: clip.sample_rate,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        },
    };
    let mut out = Cursor::new(Vec::new());
    {
        let mut w = WavWriter::new(&mut out, spec).map_err(map_hound)?;
        for &v in &clip.samples {
            match encoding {
                WavEncoding::Pcm16 => {
                    let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    w.write_sample(q).map_err(map_hound)?;
                }
                WavEncoding::Float32 => w.write_sample(v as f32).map_err(map_hound)?,
            }
        }
        w.finalize().map_err(map_hound)?;
    }
    Ok(out.into_inner())
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, SignalError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| SignalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut clip = decode_wav(&bytes)?;
    clip.source_id = path.display().to_string();
    Ok(clip)
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip, encoding: WavEncoding) -> Result<(), SignalError> {
    let path = path.as_ref();
    std::fs::write(path, encode_wav(clip, encoding)?).map_err(|source| SignalError::Io {
        path: path.to_path_buf(),
        source,
    })
}
