use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{AudioClip, AudioError};

/// Lowest value stored in a spectrogram, dB.
pub const FLOOR_DB: f64 = -80.0;
const GUARD: f64 = 1e-10;
pub const SPECTROGRAM_MAGIC: &[u8; 7] = b"ELSPEC1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
    Rectangular,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig { window_length: 512, hop: 160, window: Window::Hann }
    }
}

/// Log-magnitude STFT, `frames x bins`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Vec<f32>,
    pub frames: usize,
    pub bins: usize,
    pub hop: usize,
    pub window_length: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn frame(&self, i: usize) -> &[f32] {
        &self.values[i * self.bins..(i + 1) * self.bins]
    }

    pub fn at(&self, frame: usize, bin: usize) -> f32 {
        self.values[frame * self.bins + bin]
    }
}

/// Short-time Fourier transform in dB: `20 log10(|X| + 1e-10)`, floored at
/// [`FLOOR_DB`]. Frame count is `1 + (len - window_length) / hop`.
pub fn stft(clip: &AudioClip, config: &StftConfig) -> Result<Spectrogram, AudioError> {
    let n = config.window_length;
    if n < 2 || !n.is_power_of_two() {
        return Err(AudioError::Invalid(format!("window length {n} is not a power of two")));
    }
    if config.hop == 0 || config.hop > n {
        return Err(AudioError::Invalid(format!("hop {} must be in 1..={n}", config.hop)));
    }
    if clip.len() < n {
        return Err(AudioError::TooShort { len: clip.len(), need: n });
    }
    let frames = 1 + (clip.len() - n) / config.hop;
    let bins = n / 2 + 1;
    let window = config.window.coefficients(n);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);

    let mut values = Vec::with_capacity(frames * bins);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for f in 0..frames {
        let seg = &clip.samples[f * config.hop..f * config.hop + n];
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        values.extend(buf[..bins].iter().map(|c| (20.0 * (c.norm() + GUARD).log10()).max(FLOOR_DB) as f32));
    }
    Ok(Spectrogram { values, frames, bins, hop: config.hop, window_length: n, sample_rate: clip.sample_rate })
}

/// Binary layout: `ELSPEC1`, `u32` frames, `u32` bins (little-endian), then
/// `frames * bins` little-endian `f32` values, row-major.
pub fn write_spectrogram(path: &Path, spec: &Spectrogram) -> Result<(), AudioError> {
    let err = |e: std::io::Error| AudioError::Io { path: path.to_path_buf(), message: e.to_string() };
    let mut w = BufWriter::new(File::create(path).map_err(err)?);
    w.write_all(&encode_spectrogram(spec)).map_err(err)?;
    w.flush().map_err(err)
}

pub(crate) fn encode_spectrogram(spec: &Spectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(15 + 4 * spec.values.len());
    out.extend_from_slice(SPECTROGRAM_MAGIC);
    out.extend_from_slice(&(spec.frames as u32).to_le_bytes());
    out.extend_from_slice(&(spec.bins as u32).to_le_bytes());
    for v in &spec.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Read a spectrogram file. The binary carries only the matrix; STFT
/// parameters are taken from `config` and `sample_rate`.
pub fn read_spectrogram(path: &Path, config: &StftConfig, sample_rate: u32) -> Result<Spectrogram, AudioError> {
    let err = |e: std::io::Error| AudioError::Io { path: path.to_path_buf(), message: e.to_string() };
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(err)?).read_to_end(&mut bytes).map_err(err)?;
    let bad = |m: &str| AudioError::Format(format!("{}: {m}", path.display()));
    if bytes.len() < 15 || &bytes[..7] != SPECTROGRAM_MAGIC {
        return Err(bad("not a spectrogram file"));
    }
    let frames = u32::from_le_bytes(bytes[7..11].try_into().expect("4 bytes")) as usize;
    let bins = u32::from_le_bytes(bytes[11..15].try_into().expect("4 bytes")) as usize;
    let body = &bytes[15..];
    if body.len() != frames * bins * 4 {
        return Err(bad(&format!("expected {} bytes of data for {frames}x{bins}, found {}", frames * bins * 4, body.len())));
    }
    let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok(Spectrogram { values, frames, bins, hop: config.hop, window_length: config.window_length, sample_rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_peaks_at_its_bin() {
        let fs = 16000;
        let n = 512;
        let k = 40;
        let f = k as f64 * fs as f64 / n as f64;
        let clip = AudioClip::new((0..8000).map(|i| (2.0 * PI * f * i as f64 / fs as f64).sin()).collect(), fs);
        let s = stft(&clip, &StftConfig::default()).unwrap();
        assert_eq!(s.bins, 257);
        assert_eq!(s.frames, 1 + (8000 - 512) / 160);
        for fr in 0..s.frames {
            let row = s.frame(fr);
            let arg = (0..s.bins).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(arg, (f * n as f64 / fs as f64).round() as usize);
        }
    }

    #[test]
    fn silence_sits_on_the_floor() {
        let s = stft(&AudioClip::new(vec![0.0; 2000], 16000), &StftConfig::default()).unwrap();
        assert!(s.values.iter().all(|&v| v as f64 == FLOOR_DB));
    }

    #[test]
    fn parseval_on_a_rectangular_frame() {
        let x: Vec<f64> = (0..256).map(|i| ((i * 37 % 101) as f64 / 50.0 - 1.0) * 0.7).collect();
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::<f64>::new().plan_fft_forward(256).process(&mut buf);
        let freq: f64 = buf.iter().map(|c| c.norm_sqr()).sum::<f64>() / 256.0;
        let time: f64 = x.iter().map(|v| v * v).sum();
        assert!((freq - time).abs() < 1e-6);

        // The same energy recovered from the one-sided dB output.
        let cfg = StftConfig { window_length: 256, hop: 256, window: Window::Rectangular };
        let s = stft(&AudioClip::new(x, 16000), &cfg).unwrap();
        let mag = |v: f32| 10f64.powf(v as f64 / 20.0) - GUARD;
        let one_sided: f64 = (0..s.bins)
            .map(|k| {
                let m = mag(s.at(0, k)).max(0.0);
                if k == 0 || k == s.bins - 1 { m * m } else { 2.0 * m * m }
            })
            .sum::<f64>()
            / 256.0;
        assert!((one_sided - time).abs() < 1e-3 * time);
    }

    #[test]
    fn parameter_errors() {
        let clip = AudioClip::new(vec![0.0; 1000], 16000);
        let cfg = |w, h| StftConfig { window_length: w, hop: h, window: Window::Hann };
        assert!(stft(&clip, &cfg(500, 100)).is_err());
        assert!(stft(&clip, &cfg(512, 0)).is_err());
        assert!(stft(&clip, &cfg(512, 600)).is_err());
        assert!(matches!(stft(&clip, &cfg(2048, 100)), Err(AudioError::TooShort { .. })));
    }

    #[test]
    fn file_round_trip() {
        let clip = AudioClip::new((0..4000).map(|i| (i as f64 * 0.01).sin() * 0.5).collect(), 16000);
        let cfg = StftConfig::default();
        let s = stft(&clip, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        write_spectrogram(&p, &s).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..7], b"ELSPEC1");
        assert_eq!(u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize, s.frames);
        assert_eq!(read_spectrogram(&p, &cfg, 16000).unwrap(), s);

        std::fs::write(&p, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(read_spectrogram(&p, &cfg, 16000), Err(AudioError::Format(_))));
    }
}
