use std::path::Path;

use super::{AudioClip, AudioError};

/// Output encoding for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    /// Signed 16-bit PCM; `-32768` is `-1.0` and `32767` is `32767 / 32768`.
    Pcm16,
    Float32,
}

fn map_hound(path: &Path, e: hound::Error) -> AudioError {
    match e {
        hound::Error::IoError(io) => AudioError::Io { path: path.to_path_buf(), message: io.to_string() },
        hound::Error::FormatError(m) => AudioError::Malformed(format!("{}: {m}", path.display())),
        hound::Error::Unsupported => AudioError::Unsupported(format!("{}: unsupported WAV variant", path.display())),
        other => AudioError::Malformed(format!("{}: {other}", path.display())),
    }
}

/// Read a mono PCM16 or float32 WAV file.
pub fn read_wav(path: &Path) -> Result<AudioClip, AudioError> {
    let mut reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(AudioError::Unsupported(format!(
            "{}: {} channels, only mono is supported",
            path.display(),
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (format, bits) => {
            return Err(AudioError::Unsupported(format!(
                "{}: {bits}-bit {format:?}, expected 16-bit PCM or 32-bit float",
                path.display()
            )))
        }
    };
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(AudioError::Malformed(format!("{}: non-finite sample at {i}", path.display())));
    }
    Ok(AudioClip { samples, sample_rate: spec.sample_rate })
}

/// Write `clip` as mono WAV. Samples that do not fit the encoding are an
/// error rather than being clamped.
pub fn write_wav(path: &Path, clip: &AudioClip, depth: BitDepth) -> Result<(), AudioError> {
    clip.check_range()?;
    let (bits, format) = match depth {
        BitDepth::Pcm16 => (16, hound::SampleFormat::Int),
        BitDepth::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec { channels: 1, sample_rate: clip.sample_rate, bits_per_sample: bits, sample_format: format };
    let pcm: Vec<i16> = match depth {
        BitDepth::Pcm16 => clip
            .samples
            .iter()
            .enumerate()
            .map(|(index, &x)| {
                let v = (x * 32768.0).round();
                if v > i16::MAX as f64 {
                    Err(AudioError::Clipping { index, value: x })
                } else {
                    Ok(v as i16)
                }
            })
            .collect::<Result<_, _>>()?,
        BitDepth::Float32 => Vec::new(),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    match depth {
        BitDepth::Pcm16 => {
            for v in pcm {
                w.write_sample(v).map_err(|e| map_hound(path, e))?;
            }
        }
        BitDepth::Float32 => {
            for &x in &clip.samples {
                w.write_sample(x as f32).map_err(|e| map_hound(path, e))?;
            }
        }
    }
    w.finalize().map_err(|e| map_hound(path, e))
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::rng;

    #[test]
    fn pcm16_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let mut r = rng::stream(1, 0);
        let ints: Vec<i16> = (0..1000).map(|_| r.random()).collect();
        let clip = AudioClip::new(ints.iter().map(|&v| v as f64 / 32768.0).collect(), 16000);
        write_wav(&path, &clip, BitDepth::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        let back_ints: Vec<i16> = back.samples.iter().map(|x| (x * 32768.0) as i16).collect();
        assert_eq!(back_ints, ints);
        assert_eq!(back, clip);
    }

    #[test]
    fn full_scale_mapping() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fs.wav");
        let spec = hound::WavSpec { channels: 1, sample_rate: 16000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(i16::MIN).unwrap();
        w.write_sample(i16::MAX).unwrap();
        w.finalize().unwrap();
        let clip = read_wav(&path).unwrap();
        assert_eq!(clip.samples, vec![-1.0, 32767.0 / 32768.0]);
    }

    #[test]
    fn positive_full_scale_does_not_fit_pcm16() {
        let dir = tempfile::tempdir().unwrap();
        let clip = AudioClip::new(vec![0.0, 1.0], 16000);
        assert!(matches!(
            write_wav(&dir.path().join("c.wav"), &clip, BitDepth::Pcm16),
            Err(AudioError::Clipping { index: 1, .. })
        ));
        let loud = AudioClip::new(vec![0.0, -1.5], 16000);
        assert!(matches!(
            write_wav(&dir.path().join("d.wav"), &loud, BitDepth::Float32),
            Err(AudioError::Clipping { index: 1, .. })
        ));
    }

    #[test]
    fn rejects_24_bit_and_stereo() {
        let dir = tempfile::tempdir().unwrap();
        let p24 = dir.path().join("24.wav");
        let spec = hound::WavSpec { channels: 1, sample_rate: 16000, bits_per_sample: 24, sample_format: hound::SampleFormat::Int };
        let mut w = hound::WavWriter::create(&p24, spec).unwrap();
        w.write_sample(1000i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p24), Err(AudioError::Unsupported(_))));

        let pst = dir.path().join("st.wav");
        let spec = hound::WavSpec { channels: 2, ..hound::WavSpec { bits_per_sample: 16, ..spec } };
        let mut w = hound::WavWriter::create(&pst, spec).unwrap();
        w.write_sample(1i16).unwrap();
        w.write_sample(2i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&pst), Err(AudioError::Unsupported(_))));
    }

    #[test]
    fn garbage_header_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.wav");
        std::fs::write(&p, b"RIFF\x10\x00\x00\x00WAVEjunkjunk").unwrap();
        assert!(matches!(read_wav(&p), Err(AudioError::Malformed(_)) | Err(AudioError::Io { .. })));
        assert!(matches!(read_wav(&dir.path().join("missing.wav")), Err(AudioError::Io { .. })));
    }
}
