//! Image sources of an empty axis-aligned shoebox with one wall material.
//!
//! Along each axis the images of a source at `s` in `[0, L]` are
//! `(1 - 2p) s + 2 n L` for `p` in `{0, 1}`, reached after `|2n - p|` wall
//! reflections. Absorption is an energy fraction, so an image of order `k`
//! carries energy `(1 - a)^k / (4 pi r)^2`.

use std::f64::consts::PI;

use super::{bin, ImpulseResponse, PropagationConfig, PropagationError};
use crate::scene::{Aabb, Point3, Vec3};

pub const MAX_IMAGE_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: Point3,
    pub order: usize,
}

fn axis_images(s: f64, len: f64, max_order: usize) -> Vec<(f64, usize)> {
    let reach = max_order as i64;
    let mut out = Vec::new();
    for n in -reach..=reach {
        for p in 0..=1i64 {
            let order = (2 * n - p).unsigned_abs() as usize;
            if order <= max_order {
                out.push(((1 - 2 * p) as f64 * s + 2.0 * n as f64 * len, order));
            }
        }
    }
    out
}

/// All images of `source` with total reflection order at most `max_order`.
pub fn image_sources(dims: Vec3, source: Point3, max_order: usize) -> Vec<ImageSource> {
    let xs = axis_images(source.x, dims.x, max_order);
    let ys = axis_images(source.y, dims.y, max_order);
    let zs = axis_images(source.z, dims.z, max_order);
    let mut out = Vec::new();
    for &(x, ox) in &xs {
        for &(y, oy) in &ys {
            for &(z, oz) in &zs {
                let order = ox + oy + oz;
                if order <= max_order {
                    out.push(ImageSource { position: Vec3::new(x, y, z), order });
                }
            }
        }
    }
    out
}

/// Deterministic impulse response of a `[0, dims]` shoebox from its image
/// sources, binned like [`super::simulate_rir`].
pub fn image_source_rir(
    dims: Vec3,
    source: Point3,
    receiver: Point3,
    absorption: f64,
    max_order: usize,
    config: &PropagationConfig,
) -> Result<ImpulseResponse, PropagationError> {
    config.validate()?;
    if max_order > MAX_IMAGE_ORDER {
        return Err(PropagationError::Config(format!("max_order {max_order} exceeds {MAX_IMAGE_ORDER}")));
    }
    if !(0.0..=1.0).contains(&absorption) {
        return Err(PropagationError::Config(format!("absorption {absorption} outside [0, 1]")));
    }
    let room = Aabb::new(Vec3::ZERO, dims);
    if !room.contains(source) {
        return Err(PropagationError::SourceOutside(source.to_array()));
    }
    if !room.contains(receiver) {
        return Err(PropagationError::ReceiverOutside(receiver.to_array()));
    }
    let len = config.output_len();
    let mut energy = vec![0.0; len];
    for img in image_sources(dims, source, max_order) {
        let r = img.position.distance(receiver);
        if r < super::MIN_SOURCE_DISTANCE {
            return Err(PropagationError::Coincident(r));
        }
        let i = bin(r / config.speed_of_sound, config.sample_rate);
        if i < len {
            energy[i] += (1.0 - absorption).powi(img.order as i32) / (16.0 * PI * PI * r * r);
        }
    }
    Ok(ImpulseResponse::from_energy(&energy, 1.0, config.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_two_lattice_has_25_images() {
        // Per axis: 1 image of order 0, 2 of order 1, 2 of order 2.
        // Total order <= 2: 1 + 3*2 + (3*2 + 3*2*2) = 25.
        let imgs = image_sources(Vec3::new(5.0, 4.0, 3.0), Vec3::new(1.0, 1.0, 1.0), 2);
        assert_eq!(imgs.len(), 25);
        assert_eq!(imgs.iter().filter(|i| i.order == 1).count(), 6);
        assert_eq!(image_sources(Vec3::new(5.0, 4.0, 3.0), Vec3::new(1.0, 1.0, 1.0), 0).len(), 1);
    }

    #[test]
    fn first_order_images_mirror_the_walls() {
        let s = Vec3::new(1.0, 2.0, 0.5);
        let imgs = image_sources(Vec3::new(5.0, 4.0, 3.0), s, 1);
        let mut xs: Vec<f64> = imgs.iter().filter(|i| i.order == 1 && i.position.y == 2.0 && i.position.z == 0.5)
            .map(|i| i.position.x)
            .collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, vec![-1.0, 9.0]);
    }

    #[test]
    fn order_zero_is_the_direct_path() {
        let config = PropagationConfig::default();
        let ir = image_source_rir(Vec3::new(5.0, 4.0, 3.0), Vec3::new(4.43, 1.0, 1.0), Vec3::new(1.0, 1.0, 1.0), 0.3, 0, &config)
            .unwrap();
        assert_eq!(ir.peak().0, 160);
        assert_eq!(ir.samples.iter().filter(|&&x| x > 0.0).count(), 1);
    }

    #[test]
    fn symmetric_arrivals_have_equal_amplitude() {
        // Source and receiver share the center of a cube: each opposite wall
        // pair produces identical arrivals.
        let c = Vec3::new(1.0, 1.0, 1.0);
        let imgs = image_sources(Vec3::new(2.0, 2.0, 2.0), c, 1);
        let d: Vec<f64> = imgs.iter().filter(|i| i.order == 1).map(|i| i.position.distance(c)).collect();
        assert!(d.iter().all(|&x| (x - d[0]).abs() < 1e-12));
    }

    #[test]
    fn rejects_points_outside_and_high_orders() {
        let config = PropagationConfig::default();
        let dims = Vec3::new(5.0, 4.0, 3.0);
        let inside = Vec3::new(1.0, 1.0, 1.0);
        assert!(image_source_rir(dims, Vec3::new(6.0, 1.0, 1.0), inside, 0.3, 2, &config).is_err());
        assert!(image_source_rir(dims, inside, Vec3::new(1.0, -1.0, 1.0), 0.3, 2, &config).is_err());
        assert!(image_source_rir(dims, inside, Vec3::new(2.0, 1.0, 1.0), 0.3, 5, &config).is_err());
    }
}
