//! Joining source and receiver subpaths into complete paths.
//!
//! Results live in the energy domain: every complete path contributes its
//! squared pressure to the sample bin of its arrival time and the impulse
//! response is the square root of the binned energy. Paths are therefore
//! summed incoherently.
//!
//! Two strategies produce paths:
//!
//! * vertex connection: source vertex `i` and receiver vertex `j` are joined
//!   by a shadow ray. Surface vertices are evaluated with their Lambertian
//!   lobe (`scattering / pi`), endpoints with the isotropic `1 / (4 pi)`.
//! * endpoint spheres: a segment leaving a specular bounce that passes
//!   within `capture_radius` of the opposite endpoint, from either side.
//!   Pure specular chains can only be found this way, since a point is
//!   never hit by chance.
//!
//! A path with `k` surface vertices can often be produced by several of
//! these strategies. Its contribution is split evenly among all strategies
//! able to produce it, which keeps the sum unbiased.

use std::f64::consts::PI;

use super::subpath::{PathVertex, Scatter, Subpath};
use super::PropagationConfig;
use crate::scene::{Point3, Scene};

/// One complete path reaching the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    /// Arrival time in seconds.
    pub delay: f64,
    /// Pressure amplitude, `sqrt(energy)`.
    pub amplitude: f64,
}

impl Contribution {
    pub fn energy(&self) -> f64 {
        self.amplitude * self.amplitude
    }
}

/// Pair source subpath `n` with receiver subpath `n` and collect every
/// contribution.
///
/// Each contribution is the estimate for a single ray pair; averaging over
/// the number of pairs is left to the caller.
pub fn connect(
    scene: &Scene,
    source_subpaths: &[Subpath],
    receiver_subpaths: &[Subpath],
    config: &PropagationConfig,
) -> Vec<Contribution> {
    let mut out = Vec::new();
    let mut joiner = Joiner::new(scene, config);
    for (s, r) in source_subpaths.iter().zip(receiver_subpaths) {
        joiner.join(&s.vertices, &r.vertices, |delay, energy| {
            out.push(Contribution { delay, amplitude: energy.sqrt() })
        });
    }
    out
}

pub(crate) struct Joiner<'a> {
    scene: &'a Scene,
    receiver: Point3,
    max_bounces: usize,
    radius: f64,
    speed: f64,
    diffuse: Vec<bool>,
}

const ENDPOINT_LOBE: f64 = 1.0 / (4.0 * PI);

impl<'a> Joiner<'a> {
    pub(crate) fn new(scene: &'a Scene, config: &PropagationConfig) -> Joiner<'a> {
        Joiner {
            scene,
            receiver: scene.receiver().position,
            max_bounces: config.max_bounces,
            radius: config.capture_radius,
            speed: config.speed_of_sound,
            diffuse: Vec::with_capacity(2 * config.max_bounces.min(256) + 2),
        }
    }

    /// Emit `(delay, energy)` for every path formed from one subpath pair.
    pub(crate) fn join(&mut self, src: &[PathVertex], rcv: &[PathVertex], mut emit: impl FnMut(f64, f64)) {
        for (i, vs) in src.iter().enumerate() {
            if vs.energy <= 0.0 {
                continue;
            }
            for (j, vr) in rcv.iter().enumerate() {
                if vr.energy <= 0.0 {
                    continue;
                }
                if let Some((delay, energy)) = self.connection(src, rcv, i, j) {
                    emit(delay, energy);
                }
            }
        }
        for k in 1..src.len() {
            if let Some((delay, energy)) = self.sphere_hit(src, k, self.receiver) {
                emit(delay, energy);
            }
        }
        if let Some(source) = src.first().map(|v| v.position) {
            for k in 1..rcv.len() {
                if let Some((delay, energy)) = self.sphere_hit(rcv, k, source) {
                    emit(delay, energy);
                }
            }
        }
    }

    fn connection(&mut self, src: &[PathVertex], rcv: &[PathVertex], i: usize, j: usize) -> Option<(f64, f64)> {
        let (vs, vr) = (&src[i], &rcv[j]);
        let d = vr.position - vs.position;
        let dist2 = d.length_squared();
        if dist2 <= 1e-12 {
            return None;
        }
        let dist = dist2.sqrt();
        let dir = d / dist;

        let (lobe_s, cos_s) = match vs.normal {
            None => (ENDPOINT_LOBE, 1.0),
            Some(n) => (vs.scattering / PI, n.dot(dir)),
        };
        let (lobe_r, cos_r) = match vr.normal {
            None => (ENDPOINT_LOBE, 1.0),
            Some(n) => (vr.scattering / PI, -n.dot(dir)),
        };
        if cos_s <= 0.0 || cos_r <= 0.0 || lobe_s == 0.0 || lobe_r == 0.0 {
            return None;
        }
        let throughput = vs.weight * vr.weight * vs.energy * vr.energy * lobe_s * lobe_r * cos_s * cos_r / dist2;
        if self.scene.occluded(vs.position, vr.position) {
            return None;
        }

        // Label the full path's surface vertices from the source end.
        self.diffuse.clear();
        self.diffuse.extend(src[1..i.max(1)].iter().map(|v| v.scatter == Scatter::Diffuse));
        if i > 0 {
            self.diffuse.push(true);
        }
        if j > 0 {
            self.diffuse.push(true);
        }
        self.diffuse.extend(rcv[1..j.max(1)].iter().rev().map(|v| v.scatter == Scatter::Diffuse));

        let count = strategy_count(&self.diffuse, self.max_bounces);
        let delay = (vs.length + dist + vr.length) / self.speed;
        Some((delay, throughput / count as f64))
    }

    /// Capture-sphere estimate for the segment leaving specular vertex `k`
    /// of `path` toward the far endpoint `target`.
    ///
    /// The hit probability of a sphere of radius `R` seen from distance `r`
    /// is `Omega / (4 pi)` for an isotropic emitter, with
    /// `Omega = 2 pi (1 - sqrt(1 - R^2 / r^2))`. Dividing the point-to-point
    /// energy by it makes the estimate exact for any `r > R`, where `r` is
    /// the unfolded distance from the start of the specular chain.
    fn sphere_hit(&mut self, path: &[PathVertex], k: usize, target: Point3) -> Option<(f64, f64)> {
        let v = &path[k];
        if v.scatter != Scatter::Specular || v.energy <= 0.0 {
            return None;
        }
        let dir = v.outgoing?;
        let to_target = target - v.position;
        let t = to_target.dot(dir);
        if t <= 0.0 || t > v.segment {
            return None;
        }
        let r2 = self.radius * self.radius;
        let miss2 = (to_target.length_squared() - t * t).max(0.0);
        if miss2 > r2 {
            return None;
        }
        let along = v.length - v.chain_start + t;
        let unfolded2 = along * along + miss2;
        if unfolded2 <= r2 {
            return None;
        }
        let closest = v.position + dir * t;
        if self.scene.occluded(target, closest) {
            return None;
        }

        self.diffuse.clear();
        self.diffuse.extend(path[1..=k].iter().map(|v| v.scatter == Scatter::Diffuse));
        let count = strategy_count(&self.diffuse, self.max_bounces);

        let solid_angle = 2.0 * PI * (1.0 - (1.0 - r2 / unfolded2).sqrt());
        let delay = (v.chain_start + unfolded2.sqrt()) / self.speed;
        let energy = v.segment_weight * v.energy / (4.0 * PI * unfolded2 * solid_angle);
        Some((delay, energy / count as f64))
    }
}

/// Number of strategies that can produce a path whose surface vertices
/// (ordered from the source) carry the given diffuse labels.
///
/// Vertex connection at split `m` joins the first `m` surface vertices to
/// the remaining `k - m`; both vertices adjacent to the connecting segment
/// must be endpoints or diffuse. The receiver sphere needs a specular last
/// bounce that the source subpath was still allowed to continue from, and
/// the source sphere the mirror image of that.
pub(crate) fn strategy_count(diffuse: &[bool], max_bounces: usize) -> usize {
    let k = diffuse.len();
    let lobe = |m: usize| m == 0 || m == k + 1 || diffuse[m - 1];
    let mut count = (0..=k)
        .filter(|&m| m <= max_bounces && k - m <= max_bounces && lobe(m) && lobe(m + 1))
        .count();
    if k >= 1 && !diffuse[k - 1] && k < max_bounces {
        count += 1;
    }
    if k >= 1 && !diffuse[0] && k < max_bounces {
        count += 1;
    }
    count
}
