use std::path::Path;

use hound::{SampleFormat, WavReader};

use crate::error::{MsaError, Result};

/// Mono audio in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Audio {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Decodes a PCM WAV file (16/24/32-bit integer or 32-bit float, mono or
/// stereo). Stereo is downmixed by averaging the two channels.
pub fn decode_audio(path: impl AsRef<Path>) -> Result<Audio> {
    let path = path.as_ref();
    let unsupported = |e: &dyn std::fmt::Display| {
        MsaError::UnsupportedFormat(format!("{}: {e}", path.display()))
    };
    let reader = WavReader::open(path).map_err(|e| unsupported(&e))?;
    let spec = reader.spec();
    if !(1..=2).contains(&spec.channels) {
        return Err(unsupported(&format!("{} channels", spec.channels)));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = f64::from(1u32 << (bits - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| unsupported(&e))?
        }
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| unsupported(&e))?,
        (fmt, bits) => return Err(unsupported(&format!("{bits}-bit {fmt:?} samples"))),
    };

    let samples = if spec.channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|c| (0.5 * (c[0] + c[1])).clamp(-1.0, 1.0))
            .collect()
    } else {
        interleaved.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect()
    };
    Ok(Audio {
        samples,
        sample_rate: spec.sample_rate,
    })
}
