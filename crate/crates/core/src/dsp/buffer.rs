use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DspError;

pub const SUPPORTED_RATES: [u32; 2] = [44_100, 48_000];

/// Mono float PCM in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Rejects non-finite samples and unsupported rates; clamps to `[-1, 1]`.
    pub fn new(mut samples: Vec<f32>, sample_rate: u32) -> Result<Self, DspError> {
        if !SUPPORTED_RATES.contains(&sample_rate) {
            return Err(DspError::UnsupportedSampleRate(sample_rate));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFinite(i));
        }
        samples.iter_mut().for_each(|s| *s = s.clamp(-1.0, 1.0));
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Linear-interpolated conversion to another supported rate.
    pub fn resampled(&self, sample_rate: u32) -> Result<Self, DspError> {
        if sample_rate == self.sample_rate {
            return Ok(self.clone());
        }
        let ratio = self.sample_rate as f64 / sample_rate as f64;
        let n = (self.samples.len() as f64 / ratio).floor() as usize;
        let src = &self.samples;
        let out = (0..n)
            .map(|i| {
                let pos = i as f64 * ratio;
                let i0 = pos as usize;
                let frac = (pos - i0 as f64) as f32;
                let a = src[i0];
                let b = src.get(i0 + 1).copied().unwrap_or(a);
                a + (b - a) * frac
            })
            .collect();
        Self::new(out, sample_rate)
    }

    /// Reads a WAV file, mixing channels down to mono.
    pub fn read_wav(path: &Path) -> Result<Self, DspError> {
        let reader = hound::WavReader::open(path).map_err(|e| DspError::Wav(format!("{}: {e}", path.display())))?;
        Self::from_reader(reader).map_err(|e| match e {
            DspError::Wav(m) => DspError::Wav(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses an in-memory WAV image, mixing channels down to mono.
    pub fn read_wav_bytes(bytes: &[u8]) -> Result<Self, DspError> {
        let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| DspError::Wav(e.to_string()))?;
        Self::from_reader(reader)
    }

    fn from_reader<R: std::io::Read>(mut reader: hound::WavReader<R>) -> Result<Self, DspError> {
        let spec = reader.spec();
        let channels = spec.channels.max(1) as usize;
        let interleaved: Vec<f32> = match spec.sample_format {
            hound::SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>(),
            hound::SampleFormat::Int => {
                let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
                reader.samples::<i32>().map(|s| s.map(|v| v as f32 * scale)).collect::<Result<_, _>>()
            }
        }
        .map_err(|e| DspError::Wav(e.to_string()))?;
        let mono = interleaved
            .chunks(channels)
            .map(|frame| frame.iter().sum::<f32>() / channels as f32)
            .collect();
        Self::new(mono, spec.sample_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavFormat {
    #[default]
    F32,
    I16,
}

/// Encodes mono samples as a RIFF WAV image; `channels = 2` duplicates the
/// signal into both channels. Output is byte-stable for identical input.
pub fn encode_wav(samples: &[f32], sample_rate: u32, format: WavFormat, channels: u16) -> Result<Vec<u8>, DspError> {
    if !(1..=2).contains(&channels) {
        return Err(DspError::Wav(format!("unsupported channel count {channels}")));
    }
    let spec = match format {
        WavFormat::F32 => hound::WavSpec { channels, sample_rate, bits_per_sample: 32, sample_format: hound::SampleFormat::Float },
        WavFormat::I16 => hound::WavSpec { channels, sample_rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int },
    };
    let mut cursor = Cursor::new(Vec::with_capacity(samples.len() * 4 * channels as usize + 64));
    {
        let mut w = hound::WavWriter::new(&mut cursor, spec).map_err(|e| DspError::Wav(e.to_string()))?;
        for &s in samples {
            for _ in 0..channels {
                let r = match format {
                    WavFormat::F32 => w.write_sample(s),
                    WavFormat::I16 => w.write_sample((s.clamp(-1.0, 1.0) * i16::MAX as f32).round() as i16),
                };
                r.map_err(|e| DspError::Wav(e.to_string()))?;
            }
        }
        w.finalize().map_err(|e| DspError::Wav(e.to_string()))?;
    }
    Ok(cursor.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(matches!(AudioBuffer::new(vec![0.0], 22_050), Err(DspError::UnsupportedSampleRate(_))));
        assert!(matches!(AudioBuffer::new(vec![0.0, f32::NAN], 48_000), Err(DspError::NonFinite(1))));
        assert_eq!(AudioBuffer::new(vec![2.0, -3.0], 48_000).unwrap().samples(), &[1.0, -1.0]);
    }

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let samples: Vec<f32> = (0..1000).map(|i| (i as f32 * 0.01).sin() * 0.5).collect();
        std::fs::write(&path, encode_wav(&samples, 48_000, WavFormat::F32, 1).unwrap()).unwrap();
        let back = AudioBuffer::read_wav(&path).unwrap();
        assert_eq!(back.samples(), samples.as_slice());

        std::fs::write(&path, encode_wav(&samples, 44_100, WavFormat::I16, 2).unwrap()).unwrap();
        let back = AudioBuffer::read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 44_100);
        assert!(back.samples().iter().zip(&samples).all(|(a, b)| (a - b).abs() < 1e-4));
    }

    #[test]
    fn resample_keeps_duration() {
        let b = AudioBuffer::new(vec![0.25; 44_100], 44_100).unwrap();
        let r = b.resampled(48_000).unwrap();
        assert!((r.duration_s() - 1.0).abs() < 1e-3);
        assert!(r.samples().iter().all(|&s| s == 0.25));
    }
}
