use std::path::Path;

use echoloc::audio::{
    convolve_raw, peak_normalize, read_wav, stft, synthetic_dry, write_wav, AudioClip, BitDepth, StftConfig, Window,
    FLOOR_DB,
};
use proptest::prelude::*;

fn signal(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convolution_is_linear(a in signal(600), b in signal(600), h in signal(300)) {
        let n = a.len().min(b.len());
        let sum: Vec<f64> = a[..n].iter().zip(&b[..n]).map(|(x, y)| x + y).collect();
        let lhs = convolve_raw(&sum, &h);
        let (ca, cb) = (convolve_raw(&a[..n], &h), convolve_raw(&b[..n], &h));
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - ca[i] - cb[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn stft_frame_count(len in 2usize..5000, log_n in 1u32..10, hop_frac in 0.01f64..1.0, rect in any::<bool>()) {
        let n = 1usize << log_n;
        prop_assume!(len >= n);
        let hop = ((n as f64 * hop_frac) as usize).max(1);
        let window = if rect { Window::Rectangular } else { Window::Hann };
        let clip = AudioClip::new((0..len).map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5).collect(), 16_000);
        let s = stft(&clip, &StftConfig { window_length: n, hop, window }).unwrap();
        prop_assert_eq!(s.frames, 1 + (len - n) / hop);
        prop_assert_eq!(s.bins, n / 2 + 1);
        prop_assert_eq!(s.values.len(), s.frames * s.bins);
        prop_assert!(s.values.iter().all(|v| v.is_finite() && *v as f64 >= FLOOR_DB));
    }

    #[test]
    fn peak_normalize_is_idempotent(x in prop::collection::vec(-2.0f64..2.0, 2..400), db in -40.0f64..0.0) {
        // The DC offset is removed first, so constant clips are silent.
        let (lo, hi) = x.iter().fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
        prop_assume!(hi - lo > 1e-3);
        let clip = AudioClip::new(x, 16_000);
        let once = peak_normalize(&clip, db).unwrap();
        let twice = peak_normalize(&once, db).unwrap();
        for (a, b) in once.samples.iter().zip(&twice.samples) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn pcm16_round_trip(ints in prop::collection::vec(any::<i16>(), 1..500)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let clip = AudioClip::new(ints.iter().map(|&v| v as f64 / 32768.0).collect(), 16_000);
        write_wav(&path, &clip, BitDepth::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        let again: Vec<i16> = back.samples.iter().map(|v| (v * 32768.0) as i16).collect();
        prop_assert_eq!(again, ints);
    }
}

#[test]
fn bundled_dry_fixture_matches_the_generator() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/dry.wav");
    let fixture = read_wav(&path).unwrap();
    let generated = synthetic_dry(16_000);
    assert_eq!(fixture.sample_rate, 16_000);
    assert_eq!(fixture.len(), generated.len());
    for (a, b) in fixture.samples.iter().zip(&generated.samples) {
        assert_eq!(*a, *b as f32 as f64);
    }
}
