use std::f64::consts::PI;

use echoloc::scene::{shoebox, Material};
use echoloc::{simulate_rir, PropagationConfig, Scene, Vec3};
use proptest::prelude::*;

/// Energy every image source of a lossless `[0, dims]` box delivers within
/// `duration`, binned like the renderer.
fn lossless_image_bound(dims: Vec3, s: Vec3, r: Vec3, config: &PropagationConfig) -> f64 {
    let reach = config.speed_of_sound * config.rir_duration;
    let (d, sa, ra) = (dims.to_array(), s.to_array(), r.to_array());
    let axis = |k: usize| -> Vec<f64> {
        let n = (reach / (2.0 * d[k])).ceil() as i64 + 1;
        (-n..=n).flat_map(|i| [sa[k] + 2.0 * i as f64 * d[k], -sa[k] + 2.0 * i as f64 * d[k]]).map(|x| x - ra[k]).collect()
    };
    let (ax, ay, az) = (axis(0), axis(1), axis(2));
    let len = config.output_len();
    let mut total = 0.0;
    for x in &ax {
        for y in &ay {
            for z in &az {
                let dist = (x * x + y * y + z * z).sqrt();
                let t = (dist / config.speed_of_sound * config.sample_rate as f64).round() as usize;
                if t < len {
                    total += 1.0 / (16.0 * PI * PI * dist * dist);
                }
            }
        }
    }
    total
}

fn room() -> impl Strategy<Value = (Vec3, Vec3, Vec3)> {
    (2.0f64..7.0, 2.0f64..4.0, 2.0f64..7.0, prop::array::uniform6(0.05f64..0.95)).prop_map(|(x, y, z, f)| {
        let dims = Vec3::new(x, y, z);
        (dims, Vec3::new(f[0] * x, f[1] * y, f[2] * z), Vec3::new(f[3] * x, f[4] * y, f[5] * z))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_stays_under_the_lossless_bound(
        (dims, src, rcv) in room(),
        absorption in 0.2f64..0.9,
        scattering in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(src.distance(rcv) > 0.3);
        let scene = shoebox(dims, Material::new("w", absorption, scattering), rcv).unwrap();
        let config = PropagationConfig { rays_per_endpoint: 2000, rir_duration: 0.08, seed, ..Default::default() };
        let ir = simulate_rir(&scene, src, &config).unwrap();
        prop_assert_eq!(ir.len(), config.output_len());
        prop_assert!(ir.samples.iter().all(|v| v.is_finite() && *v >= 0.0));
        let bound = lossless_image_bound(dims, src, rcv, &config);
        prop_assert!(ir.energy() <= bound, "energy {} above bound {}", ir.energy(), bound);

        // Nothing arrives before the direct sound.
        let direct = (src.distance(rcv) / config.speed_of_sound * config.sample_rate as f64).round() as usize;
        prop_assert!(ir.samples[..direct.saturating_sub(1)].iter().all(|v| *v == 0.0));
    }
}

/// Sample standard deviation of the total energy over 40 seeds. Ten seeds
/// leave about 24% sampling error on each estimate, too much for the ratio.
fn energy_spread(scene: &Scene, src: Vec3, rays: usize) -> f64 {
    const SEEDS: u64 = 40;
    let energies: Vec<f64> = (0..SEEDS)
        .map(|seed| {
            let config = PropagationConfig { rays_per_endpoint: rays, rir_duration: 0.2, seed, ..Default::default() };
            simulate_rir(scene, src, &config).unwrap().energy()
        })
        .collect();
    let n = SEEDS as f64;
    let mean = energies.iter().sum::<f64>() / n;
    (energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn standard_error_shrinks_when_rays_quadruple() {
    let scene = shoebox(Vec3::new(5.0, 4.0, 3.0), Material::new("w", 0.3, 0.5), Vec3::new(2.0, 1.5, 1.5)).unwrap();
    let src = Vec3::new(3.6, 2.5, 1.1);
    let coarse = energy_spread(&scene, src, 1000);
    let fine = energy_spread(&scene, src, 4000);
    assert!(fine / coarse < 0.7, "spread {coarse:.3e} -> {fine:.3e}");
}

#[test]
fn house_rir_is_deterministic() {
    let scene = Scene::house10();
    let config = PropagationConfig { rays_per_endpoint: 2000, rir_duration: 0.3, seed: 9, ..Default::default() };
    let src = Vec3::new(6.0, 1.7, 2.0);
    let a = simulate_rir(&scene, src, &config).unwrap();
    let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| simulate_rir(&scene, src, &config).unwrap());
    assert_eq!(a, b);
}
