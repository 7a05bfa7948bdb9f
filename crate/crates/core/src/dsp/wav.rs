use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

/// Mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Wraps already-decoded mono samples.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Parameter(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
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

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Returns a copy with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Writes the clip as a mono 32-bit float WAV file.
    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let spec = WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut writer = WavWriter::create(path, spec).map_err(|e| hound_error(path, e))?;
        for &s in &self.samples {
            writer
                .write_sample(s as f32)
                .map_err(|e| hound_error(path, e))?;
        }
        writer.finalize().map_err(|e| hound_error(path, e))
    }
}

fn hound_error(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) if e.kind() != std::io::ErrorKind::UnexpectedEof => {
            Error::UnreadableFile {
                path: path.to_owned(),
                reason: e.to_string(),
            }
        }
        hound::Error::Unsupported => Error::UnsupportedCodec {
            path: path.to_owned(),
            reason: "unsupported WAV feature".into(),
        },
        other => Error::UnreadableFile {
            path: path.to_owned(),
            reason: other.to_string(),
        },
    }
}

/// Reads a RIFF/WAVE file holding PCM16 or IEEE float32 samples.
///
/// Samples are scaled to `[-1, 1]` (PCM16 by `1/32768`) and multi-channel
/// frames are averaged down to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| hound_error(path, e))?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if channels == 0 {
        return Err(Error::UnreadableFile {
            path: path.to_owned(),
            reason: "zero channels".into(),
        });
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| hound_error(path, e))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| hound_error(path, e))?,
        (format, bits) => {
            return Err(Error::UnsupportedCodec {
                path: path.to_owned(),
                reason: format!("{bits}-bit {format:?} samples"),
            })
        }
    };

    if interleaved.len() < channels {
        return Err(Error::EmptyAudio(path.to_owned()));
    }
    if interleaved.iter().any(|s| !s.is_finite()) {
        return Err(Error::UnreadableFile {
            path: path.to_owned(),
            reason: "non-finite sample".into(),
        });
    }

    let samples = if channels == 1 {
        interleaved
    } else {
        let scale = 1.0 / channels as f64;
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() * scale)
            .collect()
    };
    AudioClip::new(samples, spec.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_pcm16(path: &Path, channels: u16, data: &[i16]) {
        let spec = WavSpec {
            channels,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in data {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn pcm16_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        write_pcm16(&path, 1, &[0, 16384, -16384, 32767]);
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.sample_rate(), 16_000);
        assert_eq!(clip.samples(), &[0.0, 0.5, -0.5, 32767.0 / 32768.0]);
        assert!((clip.samples()[3] - 0.99997).abs() < 1e-5);
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8_000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        for _ in 0..2 {
            w.write_sample(1.0f32).unwrap();
            w.write_sample(0.0f32).unwrap();
        }
        w.finalize().unwrap();
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.samples(), &[0.5, 0.5]);
    }

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let clip = AudioClip::new(vec![0.25, -0.75, 1.0], 16_000).unwrap();
        clip.write_wav(&path).unwrap();
        assert_eq!(load_wav(&path).unwrap(), clip);
    }

    #[test]
    fn truncated_header_is_unreadable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        write_pcm16(&path, 1, &[1, 2, 3, 4]);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..20]).unwrap();
        let err = load_wav(&path).unwrap_err();
        assert!(matches!(err, Error::UnreadableFile { .. }), "{err}");
        assert!(err.to_string().starts_with("unreadable file"));
    }

    #[test]
    fn zero_length_audio() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.wav");
        write_pcm16(&path, 1, &[]);
        assert!(matches!(load_wav(&path), Err(Error::EmptyAudio(_))));
    }

    #[test]
    fn unsupported_bit_depth() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 8,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            load_wav(&path),
            Err(Error::UnsupportedCodec { .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_wav("/nonexistent/x.wav"),
            Err(Error::UnreadableFile { .. })
        ));
    }
}
