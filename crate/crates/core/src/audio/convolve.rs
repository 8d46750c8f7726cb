use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{AudioClip, AudioError};
use crate::propagation::ImpulseResponse;

/// Peak ceiling after convolution, `-1 dBFS`.
pub const ANTI_CLIP_PEAK: f64 = 0.891_250_938_133_745_5;

/// Convolution result with the gain that was applied to keep it in range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convolved {
    pub clip: AudioClip,
    /// 1.0 unless the raw result peaked above [`ANTI_CLIP_PEAK`].
    pub gain: f64,
}

/// Full linear convolution by FFT overlap-add, without any rescaling.
pub fn convolve_raw(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    let n = (2 * h.len()).next_power_of_two().max(64);
    let seg = n - h.len() + 1;

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut hf: Vec<Complex<f64>> = h.iter().map(|&v| Complex::new(v, 0.0)).collect();
    hf.resize(n, Complex::new(0.0, 0.0));
    fwd.process(&mut hf);

    let mut out = vec![0.0; out_len];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for start in (0..x.len()).step_by(seg) {
        let end = (start + seg).min(x.len());
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (b, &v) in buf.iter_mut().zip(&x[start..end]) {
            b.re = v;
        }
        fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&hf) {
            *b *= k;
        }
        inv.process(&mut buf);
        let valid = (end - start + h.len() - 1).min(out_len - start);
        for (o, b) in out[start..start + valid].iter_mut().zip(&buf) {
            *o += b.re / n as f64;
        }
    }
    out
}

/// Convolve `dry` with `ir`, then scale down if needed so the peak stays at
/// or below [`ANTI_CLIP_PEAK`].
pub fn convolve(dry: &AudioClip, ir: &ImpulseResponse) -> Result<Convolved, AudioError> {
    if dry.sample_rate != ir.sample_rate {
        return Err(AudioError::RateMismatch(dry.sample_rate, ir.sample_rate));
    }
    let samples = convolve_raw(&dry.samples, &ir.samples);
    let clip = AudioClip::new(samples, dry.sample_rate);
    let peak = clip.peak();
    let gain = if peak > ANTI_CLIP_PEAK { ANTI_CLIP_PEAK / peak } else { 1.0 };
    Ok(Convolved { clip: if gain == 1.0 { clip } else { clip.scaled(gain) }, gain })
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::rng;

    fn direct(x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len() + h.len() - 1];
        for (i, a) in x.iter().enumerate() {
            for (j, b) in h.iter().enumerate() {
                y[i + j] += a * b;
            }
        }
        y
    }

    fn noise(n: usize, stream: u64) -> Vec<f64> {
        let mut r = rng::stream(3, stream);
        (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn matches_direct_convolution() {
        let x = noise(1000, 0);
        let h = noise(300, 1);
        let a = convolve_raw(&x, &h);
        let b = direct(&x, &h);
        assert_eq!(a.len(), 1299);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn unit_impulse_is_identity_and_delay_shifts() {
        let x = noise(500, 2);
        let y = convolve_raw(&x, &[1.0]);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
        let mut h = vec![0.0; 8];
        h[7] = 1.0;
        let y = convolve_raw(&x, &h);
        assert!(y[..7].iter().all(|v| v.abs() < 1e-12));
        for (u, v) in x.iter().zip(&y[7..]) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn anti_clip_gain_is_reported() {
        let dry = AudioClip::new(vec![0.8, 0.8, 0.8], 16000);
        let ir = ImpulseResponse { samples: vec![1.0, 1.0], sample_rate: 16000 };
        let out = convolve(&dry, &ir).unwrap();
        assert!((out.clip.peak() - ANTI_CLIP_PEAK).abs() < 1e-12);
        assert!((out.gain - ANTI_CLIP_PEAK / 1.6).abs() < 1e-12);

        let quiet = ImpulseResponse { samples: vec![0.1], sample_rate: 16000 };
        assert_eq!(convolve(&dry, &quiet).unwrap().gain, 1.0);
        let other = ImpulseResponse { samples: vec![0.1], sample_rate: 48000 };
        assert!(matches!(convolve(&dry, &other), Err(AudioError::RateMismatch(16000, 48000))));
    }
}
