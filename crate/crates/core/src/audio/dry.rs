//! Bundled dry source signal.
//!
//! Eight 250 ms events alternate between voiced harmonic complexes and
//! noise bursts, which covers the band up to 7 kHz while keeping the crest
//! factor low enough to reach -15 LUFS from a -1 dBFS peak.

use std::f64::consts::PI;

use rand::Rng;

use super::AudioClip;
use crate::rng::{self, tags};

/// Seconds.
pub const DRY_DURATION: f64 = 2.0;

pub fn synthetic_dry(sample_rate: u32) -> AudioClip {
    let fs = sample_rate as f64;
    let n = (DRY_DURATION * fs).round() as usize;
    let event = n / 8;
    let mut r = rng::stream(rng::derive_seed(0, tags::DRY), 0);
    let mut out = vec![0.0; n];
    let fundamentals = [140.0, 210.0, 175.0, 260.0];
    let top = 7000f64.min(0.45 * fs);

    for (e, chunk) in out.chunks_mut(event).enumerate() {
        let len = chunk.len() as f64;
        // 20 ms raised-cosine fades on both ends.
        let fade = (0.02 * fs).min(len / 2.0);
        let env = |i: usize| {
            let t = i as f64;
            let a = (t / fade).min(1.0).min((len - 1.0 - t) / fade).max(0.0);
            0.5 - 0.5 * (PI * a).cos()
        };
        if e % 2 == 0 {
            let f0 = fundamentals[e / 2 % fundamentals.len()];
            let harmonics = (top / f0) as usize;
            let phases: Vec<f64> = (0..harmonics).map(|_| r.random_range(0.0..2.0 * PI)).collect();
            for (i, s) in chunk.iter_mut().enumerate() {
                let t = i as f64 / fs;
                // Slight vibrato keeps the partials from being perfectly periodic.
                let f = f0 * (1.0 + 0.01 * (2.0 * PI * 5.0 * t).sin());
                let mut v = 0.0;
                for (k, ph) in phases.iter().enumerate() {
                    let h = (k + 1) as f64;
                    v += (2.0 * PI * f * h * t + ph).sin() / h.sqrt();
                }
                *s = env(i) * v;
            }
        } else {
            // Noise with a gentle one-pole tilt whose corner moves per burst.
            let alpha = [0.2, 0.5, 0.8, 0.35][e / 2 % 4];
            let mut lp = 0.0;
            for (i, s) in chunk.iter_mut().enumerate() {
                let w: f64 = r.random_range(-1.0..1.0);
                lp = alpha * lp + (1.0 - alpha) * w;
                *s = env(i) * lp;
            }
        }
        let peak = chunk.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
        if peak > 0.0 {
            chunk.iter_mut().for_each(|x| *x *= 0.8 / peak);
        }
    }
    AudioClip::new(out, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::super::{loudness_normalize, measure_lufs, peak_normalize};
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = synthetic_dry(16000);
        assert_eq!(a, synthetic_dry(16000));
        assert_eq!(a.len(), 32000);
        assert!(a.peak() <= 1.0);
    }

    #[test]
    fn survives_the_normalization_chain() {
        let dry = synthetic_dry(16000);
        let peaked = peak_normalize(&dry, -1.0).unwrap();
        let loud = loudness_normalize(&peaked, -15.0).unwrap();
        assert!(loud.peak() <= 1.0);
        assert!((measure_lufs(&loud).unwrap().lufs().unwrap() + 15.0).abs() < 0.1);
    }
}
