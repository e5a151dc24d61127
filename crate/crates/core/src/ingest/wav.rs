use std::io::{Cursor, Read};
use std::path::Path;

use super::IngestError;

/// Mono audio with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub id: String,
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioClip {
    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Reads a 16-bit PCM mono WAV; samples are divided by 32768. The clip id is
/// the file stem.
pub fn read_wav(path: &Path) -> Result<AudioClip, IngestError> {
    let bytes = std::fs::read(path).map_err(|e| IngestError::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_wav_bytes(id, &bytes, path)
}

/// Decodes WAV bytes; `origin` is only used in error messages.
pub fn read_wav_bytes(id: impl Into<String>, bytes: &[u8], origin: &Path) -> Result<AudioClip, IngestError> {
    let malformed = |e: hound::Error| IngestError::MalformedWav {
        path: origin.to_path_buf(),
        message: e.to_string(),
    };
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| match e {
        hound::Error::Unsupported => IngestError::UnsupportedCodec {
            path: origin.to_path_buf(),
        },
        other => malformed(other),
    })?;
    decode(id.into(), reader, origin)
}

fn decode<R: Read>(id: String, reader: hound::WavReader<R>, origin: &Path) -> Result<AudioClip, IngestError> {
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(IngestError::UnsupportedCodec {
            path: origin.to_path_buf(),
        });
    }
    if spec.channels != 1 {
        return Err(IngestError::UnsupportedChannels {
            path: origin.to_path_buf(),
            channels: spec.channels,
        });
    }
    if spec.bits_per_sample != 16 {
        return Err(IngestError::UnsupportedBitDepth {
            path: origin.to_path_buf(),
            bits: spec.bits_per_sample,
        });
    }
    let expected = reader.len() as usize;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| IngestError::MalformedWav {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
    if samples.len() != expected {
        return Err(IngestError::MalformedWav {
            path: origin.to_path_buf(),
            message: format!("header declares {expected} samples, found {}", samples.len()),
        });
    }
    if samples.is_empty() {
        return Err(IngestError::EmptyAudio {
            path: origin.to_path_buf(),
        });
    }
    Ok(AudioClip {
        id,
        sample_rate: spec.sample_rate,
        samples,
    })
}

/// Writes 16-bit PCM mono. Samples are scaled by 32768, rounded and clamped,
/// so values that are multiples of `1/32768` survive a round trip exactly.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<(), IngestError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let io_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => IngestError::io(path, io),
        other => IngestError::MalformedWav {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(io_err)?;
    for &s in &clip.samples {
        let v = (s * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        writer.write_sample(v).map_err(io_err)?;
    }
    writer.finalize().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_raw(path: &Path, channels: u16, bits: u16, samples: &[i32]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: 16_000,
            bits_per_sample: bits,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn silence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("quiet.wav");
        write_raw(&p, 1, 16, &vec![0; 16_000]);
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.id, "quiet");
        assert_eq!(clip.sample_rate, 16_000);
        assert_eq!(clip.samples.len(), 16_000);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn scale_boundaries() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("edge.wav");
        write_raw(&p, 1, 16, &[-32768, 32767, 16384]);
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.samples, vec![-1.0, 32767.0 / 32768.0, 0.5]);
    }

    #[test]
    fn stereo_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        write_raw(&p, 2, 16, &[0, 0, 1, 1]);
        assert!(matches!(
            read_wav(&p),
            Err(IngestError::UnsupportedChannels { channels: 2, .. })
        ));
    }

    #[test]
    fn eight_bit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b8.wav");
        write_raw(&p, 1, 8, &[0, 1, 2]);
        assert!(matches!(
            read_wav(&p),
            Err(IngestError::UnsupportedBitDepth { bits: 8, .. })
        ));
    }

    #[test]
    fn float_codec_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0.5f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(IngestError::UnsupportedCodec { .. })));
    }

    #[test]
    fn truncated_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.wav");
        write_raw(&p, 1, 16, &[1, 2, 3]);
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..20]).unwrap();
        assert!(matches!(read_wav(&p), Err(IngestError::MalformedWav { .. })));
    }

    #[test]
    fn truncated_data() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.wav");
        write_raw(&p, 1, 16, &[1; 100]);
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 50]).unwrap();
        assert!(matches!(read_wav(&p), Err(IngestError::MalformedWav { .. })));
    }

    proptest! {
        #[test]
        fn pcm_round_trip(raw in proptest::collection::vec(any::<i16>(), 1..500)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("rt.wav");
            let clip = AudioClip {
                id: "rt".into(),
                sample_rate: 16_000,
                samples: raw.iter().map(|&v| v as f64 / 32768.0).collect(),
            };
            write_wav(&p, &clip).unwrap();
            prop_assert_eq!(read_wav(&p).unwrap(), clip);
        }
    }
}
