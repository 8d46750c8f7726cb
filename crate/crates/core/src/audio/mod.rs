//! Dry-sound preparation, convolution with impulse responses, WAV I/O and
//! log-magnitude spectrograms.

mod convolve;
mod dry;
mod loudness;
mod stft;
mod wav;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use convolve::{convolve, convolve_raw, Convolved, ANTI_CLIP_PEAK};
pub use dry::{synthetic_dry, DRY_DURATION};
pub use loudness::{loudness_normalize, measure_lufs, Loudness, ABSOLUTE_GATE};
pub use stft::{
    read_spectrogram, stft, write_spectrogram, Spectrogram, StftConfig, Window, FLOOR_DB, SPECTROGRAM_MAGIC,
};
pub use wav::{read_wav, write_wav, BitDepth};
pub(crate) use stft::encode_spectrogram;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("malformed WAV data: {0}")]
    Malformed(String),
    #[error("unsupported encoding: {0}")]
    Unsupported(String),
    #[error("sample {index} ({value}) exceeds full scale")]
    Clipping { index: usize, value: f64 },
    #[error("clip is silent")]
    Silent,
    #[error("sample rate {0} Hz is not supported")]
    SampleRate(u32),
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("clip has {len} samples, need at least {need}")]
    TooShort { len: usize, need: usize },
    #[error("loudness is below the absolute gate")]
    BelowGate,
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("{0}")]
    Format(String),
}

/// Mono audio with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> AudioClip {
        AudioClip { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
    }

    pub fn scaled(&self, gain: f64) -> AudioClip {
        AudioClip { samples: self.samples.iter().map(|x| x * gain).collect(), sample_rate: self.sample_rate }
    }

    /// First sample outside `[-1, 1]` or non-finite.
    pub fn check_range(&self) -> Result<(), AudioError> {
        match self.samples.iter().position(|x| !(x.abs() <= 1.0)) {
            Some(index) => Err(AudioError::Clipping { index, value: self.samples[index] }),
            None => Ok(()),
        }
    }
}

/// dBFS to linear amplitude.
pub fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Remove the mean, then scale so the largest magnitude is `target_db` dBFS.
pub fn peak_normalize(clip: &AudioClip, target_db: f64) -> Result<AudioClip, AudioError> {
    if clip.is_empty() {
        return Err(AudioError::Silent);
    }
    let mean = clip.samples.iter().sum::<f64>() / clip.len() as f64;
    let centered: Vec<f64> = clip.samples.iter().map(|x| x - mean).collect();
    let peak = centered.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    // Anything this small is DC plus rounding noise.
    if !(peak > 1e-12 * mean.abs()) {
        return Err(AudioError::Silent);
    }
    let gain = db_to_gain(target_db) / peak;
    Ok(AudioClip { samples: centered.iter().map(|x| x * gain).collect(), sample_rate: clip.sample_rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_normalize_hits_target() {
        let clip = AudioClip::new(vec![0.5, -0.25, 0.1, -0.35], 16000);
        let out = peak_normalize(&clip, -1.0).unwrap();
        assert!((out.peak() - 10f64.powf(-1.0 / 20.0)).abs() < 1e-12);
        assert!((out.peak() - 0.891_250_938_133_745_5).abs() < 1e-12);
        assert!(out.samples.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn peak_normalize_is_a_fixpoint() {
        let clip = AudioClip::new(vec![0.3, -0.7, 0.2, 0.2], 16000);
        let once = peak_normalize(&clip, -1.0).unwrap();
        let twice = peak_normalize(&once, -1.0).unwrap();
        for (a, b) in once.samples.iter().zip(&twice.samples) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_clip_is_silent_after_dc_removal() {
        let clip = AudioClip::new(vec![0.3; 100], 16000);
        assert!(matches!(peak_normalize(&clip, -1.0), Err(AudioError::Silent)));
        assert!(matches!(peak_normalize(&AudioClip::new(vec![0.0; 10], 16000), -1.0), Err(AudioError::Silent)));
    }
}
