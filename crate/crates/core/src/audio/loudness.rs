//! Integrated loudness after ITU-R BS.1770-4.

use std::f64::consts::PI;

use super::{AudioClip, AudioError};

/// Blocks quieter than this are ignored entirely, LUFS.
pub const ABSOLUTE_GATE: f64 = -70.0;
const RELATIVE_GATE: f64 = -10.0;
const BLOCK_SECONDS: f64 = 0.4;
const STEP_SECONDS: f64 = 0.1;
const OFFSET: f64 = -0.691;
const SUPPORTED_RATES: [u32; 3] = [16_000, 44_100, 48_000];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loudness {
    Lufs(f64),
    /// No block passed the absolute gate (for example digital silence).
    BelowGate,
}

impl Loudness {
    pub fn lufs(self) -> Option<f64> {
        match self {
            Loudness::Lufs(v) => Some(v),
            Loudness::BelowGate => None,
        }
    }
}

#[derive(Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 3],
}

impl Biquad {
    fn run(&self, x: &[f64]) -> Vec<f64> {
        // Direct form II transposed.
        let (mut z1, mut z2) = (0.0, 0.0);
        x.iter()
            .map(|&v| {
                let y = self.b[0] * v + z1;
                z1 = self.b[1] * v - self.a[1] * y + z2;
                z2 = self.b[2] * v - self.a[2] * y;
                y
            })
            .collect()
    }
}

/// The two K-weighting stages, derived from their analog prototypes by the
/// bilinear transform with pre-warping. At 48 kHz they reproduce the
/// coefficient table of the standard.
fn k_weighting(fs: f64) -> [Biquad; 2] {
    let f0 = 1681.974450955533;
    let gain_db = 3.999843853973347;
    let q = 0.7071752369554196;
    let k = (PI * f0 / fs).tan();
    let vh = 10f64.powf(gain_db / 20.0);
    let vb = vh.powf(0.4996667741545416);
    let a0 = 1.0 + k / q + k * k;
    let shelf = Biquad {
        b: [(vh + vb * k / q + k * k) / a0, 2.0 * (k * k - vh) / a0, (vh - vb * k / q + k * k) / a0],
        a: [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0],
    };

    let f0 = 38.13547087602444;
    let q = 0.5003270373238773;
    let k = (PI * f0 / fs).tan();
    let a0 = 1.0 + k / q + k * k;
    let highpass = Biquad { b: [1.0, -2.0, 1.0], a: [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0] };
    [shelf, highpass]
}

/// Integrated loudness: K-weighting, 400 ms blocks every 100 ms, then the
/// absolute and relative gates.
pub fn measure_lufs(clip: &AudioClip) -> Result<Loudness, AudioError> {
    if !SUPPORTED_RATES.contains(&clip.sample_rate) {
        return Err(AudioError::SampleRate(clip.sample_rate));
    }
    let fs = clip.sample_rate as f64;
    let block = (BLOCK_SECONDS * fs).round() as usize;
    let step = (STEP_SECONDS * fs).round() as usize;
    if clip.len() < block {
        return Err(AudioError::TooShort { len: clip.len(), need: block });
    }
    let [shelf, highpass] = k_weighting(fs);
    let y = highpass.run(&shelf.run(&clip.samples));

    let mut prefix = Vec::with_capacity(y.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in &y {
        acc += v * v;
        prefix.push(acc);
    }
    let blocks: Vec<f64> = (0..=(y.len() - block) / step)
        .map(|j| (prefix[j * step + block] - prefix[j * step]) / block as f64)
        .collect();
    let loud = |z: f64| OFFSET + 10.0 * z.log10();

    let absolute: Vec<f64> = blocks.iter().copied().filter(|&z| z > 0.0 && loud(z) > ABSOLUTE_GATE).collect();
    if absolute.is_empty() {
        return Ok(Loudness::BelowGate);
    }
    let threshold = loud(mean(&absolute)) + RELATIVE_GATE;
    let gated: Vec<f64> = absolute.into_iter().filter(|&z| loud(z) > threshold).collect();
    Ok(Loudness::Lufs(loud(mean(&gated))))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Scale `clip` by one gain so that its integrated loudness is
/// `target_lufs` within 0.1 LU.
///
/// Gating depends on level, so the gain is refined up to three times.
pub fn loudness_normalize(clip: &AudioClip, target_lufs: f64) -> Result<AudioClip, AudioError> {
    let mut gain = 1.0;
    let mut current = measure_lufs(clip)?.lufs().ok_or(AudioError::BelowGate)?;
    for _ in 0..3 {
        if (current - target_lufs).abs() < 1e-6 {
            break;
        }
        gain *= super::db_to_gain(target_lufs - current);
        current = measure_lufs(&clip.scaled(gain))?.lufs().ok_or(AudioError::BelowGate)?;
    }
    if clip.peak() * gain > 1.0 {
        let index = clip.samples.iter().position(|x| (x * gain).abs() > 1.0).unwrap_or(0);
        return Err(AudioError::Clipping { index, value: clip.samples[index] * gain });
    }
    Ok(clip.scaled(gain))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, amp: f64, fs: u32, secs: f64) -> AudioClip {
        let n = (fs as f64 * secs) as usize;
        AudioClip::new((0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / fs as f64).sin()).collect(), fs)
    }

    #[test]
    fn coefficients_match_the_48k_table() {
        let [s, h] = k_weighting(48000.0);
        let table_b = [1.53512485958697, -2.69169618940638, 1.19839281085285];
        let table_a = [-1.69065929318241, 0.73248077421585];
        for (x, y) in s.b.iter().zip(table_b) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!((s.a[1] - table_a[0]).abs() < 1e-9 && (s.a[2] - table_a[1]).abs() < 1e-9);
        assert!((h.a[1] - -1.99004745483398).abs() < 1e-9 && (h.a[2] - 0.99007225036621).abs() < 1e-9);
    }

    #[test]
    fn silence_is_below_gate() {
        let clip = AudioClip::new(vec![0.0; 48000], 48000);
        assert_eq!(measure_lufs(&clip).unwrap(), Loudness::BelowGate);
    }

    #[test]
    fn reference_sine() {
        // Value from an independent BS.1770 meter for a 5 s, 997 Hz,
        // full-scale sine at 48 kHz.
        let l = measure_lufs(&sine(997.0, 1.0, 48000, 5.0)).unwrap().lufs().unwrap();
        assert!((l - -3.0103).abs() < 0.1, "{l}");
    }

    #[test]
    fn short_clip_and_odd_rate_are_errors() {
        assert!(matches!(measure_lufs(&sine(997.0, 0.5, 16000, 0.3)), Err(AudioError::TooShort { .. })));
        assert!(matches!(measure_lufs(&sine(997.0, 0.5, 22050, 1.0)), Err(AudioError::SampleRate(22050))));
    }

    #[test]
    fn normalize_raises_by_five_db() {
        let clip = sine(440.0, 0.1, 16000, 2.0);
        let before = measure_lufs(&clip).unwrap().lufs().unwrap();
        let target = before + 5.0;
        let out = loudness_normalize(&clip, target).unwrap();
        let gain_db = 20.0 * (out.peak() / clip.peak()).log10();
        assert!((gain_db - 5.0).abs() < 0.05);
        assert!((measure_lufs(&out).unwrap().lufs().unwrap() - target).abs() < 0.1);
    }

    #[test]
    fn normalize_to_current_level_is_identity() {
        let clip = sine(300.0, 0.2, 16000, 1.5);
        let l = measure_lufs(&clip).unwrap().lufs().unwrap();
        let out = loudness_normalize(&clip, l).unwrap();
        assert!((out.peak() / clip.peak() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn clipping_guard() {
        let clip = sine(997.0, 0.95, 48000, 1.0);
        assert!(matches!(loudness_normalize(&clip, -1.0), Err(AudioError::Clipping { .. })));
        let silent = AudioClip::new(vec![0.0; 16000], 16000);
        assert!(matches!(loudness_normalize(&silent, -15.0), Err(AudioError::BelowGate)));
    }
}
