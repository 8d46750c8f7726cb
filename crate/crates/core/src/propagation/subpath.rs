use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::PropagationConfig;
use crate::rng;
use crate::scene::{Point3, Scene, Vec3};

/// Subpaths stop once the surviving energy drops below this fraction.
pub const MIN_ENERGY: f64 = 1e-6;

/// How a vertex continues the subpath.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scatter {
    /// The subpath endpoint (source or receiver position).
    Origin,
    Specular,
    Diffuse,
    /// No continuation: absorbed, out of bounces, below the energy floor or
    /// killed by Russian roulette.
    Terminated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathVertex {
    pub position: Point3,
    /// Surviving energy fraction after the interaction at this vertex.
    pub energy: f64,
    /// Cumulative path length from the subpath origin, meters.
    pub length: f64,
    /// Russian-roulette compensation accumulated before this vertex.
    pub weight: f64,
    /// Surface normal facing the arriving ray; `None` at the origin.
    pub normal: Option<Vec3>,
    /// Diffuse fraction of the surface material (zero at the origin).
    pub scattering: f64,
    pub scatter: Scatter,
    /// Continuation direction, for `Origin`, `Specular` and `Diffuse` vertices.
    pub outgoing: Option<Vec3>,
    /// Distance to the next vertex along `outgoing`; infinite if the ray escaped.
    pub segment: f64,
    /// Roulette compensation carried by the outgoing segment.
    pub segment_weight: f64,
    /// Cumulative length where the current run of specular bounces began.
    pub chain_start: f64,
}

/// Ordered vertices of one random walk, starting at the endpoint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Subpath {
    pub vertices: Vec<PathVertex>,
}

impl Subpath {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Number of surface interactions (vertices after the origin).
    pub fn bounces(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }
}

pub(crate) fn isotropic(rng: &mut ChaCha8Rng) -> Vec3 {
    let z = 1.0 - 2.0 * rng.random::<f64>();
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Orthonormal basis around a unit normal (Duff et al. 2017).
fn basis(n: Vec3) -> (Vec3, Vec3) {
    let sign = 1f64.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    (
        Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x),
        Vec3::new(b, sign + n.y * n.y * a, -n.y),
    )
}

pub(crate) fn cosine_hemisphere(n: Vec3, rng: &mut ChaCha8Rng) -> Vec3 {
    let u: f64 = rng.random();
    let phi = 2.0 * PI * rng.random::<f64>();
    let r = u.sqrt();
    let (t, b) = basis(n);
    let d = t * (r * phi.cos()) + b * (r * phi.sin()) + n * (1.0 - u).max(0.0).sqrt();
    d.normalized()
}

/// Trace one subpath from `origin` with an isotropic first direction.
pub fn trace_subpath(scene: &Scene, origin: Point3, config: &PropagationConfig, rng: &mut ChaCha8Rng) -> Subpath {
    let mut vertices = Vec::with_capacity(16);
    let mut dir = isotropic(rng);
    vertices.push(PathVertex {
        position: origin,
        energy: 1.0,
        length: 0.0,
        weight: 1.0,
        normal: None,
        scattering: 0.0,
        scatter: if config.max_bounces == 0 { Scatter::Terminated } else { Scatter::Origin },
        outgoing: None,
        segment: f64::INFINITY,
        segment_weight: 1.0,
        chain_start: 0.0,
    });
    if config.max_bounces == 0 {
        return Subpath { vertices };
    }
    vertices[0].outgoing = Some(dir);

    let mut position = origin;
    let mut energy = 1.0;
    let mut length = 0.0;
    let mut weight = 1.0;
    let mut chain_start = 0.0;

    for bounce in 1..=config.max_bounces {
        let Some(hit) = scene.intersect(position, dir) else {
            break;
        };
        let prev = vertices.len() - 1;
        vertices[prev].segment = hit.distance;

        let material = scene.material(hit.material);
        energy *= 1.0 - material.absorption;
        length += hit.distance;
        position = hit.point;

        let mut vertex = PathVertex {
            position,
            energy,
            length,
            weight,
            normal: Some(hit.normal),
            scattering: material.scattering,
            scatter: Scatter::Terminated,
            outgoing: None,
            segment: f64::INFINITY,
            segment_weight: weight,
            chain_start,
        };

        let mut survive = energy >= MIN_ENERGY && bounce < config.max_bounces;
        if survive && bounce >= config.russian_roulette_start {
            let q = (energy * weight).clamp(0.1, 1.0);
            if rng.random::<f64>() < q {
                weight /= q;
            } else {
                survive = false;
            }
        }
        if survive {
            if rng.random::<f64>() < material.scattering {
                dir = cosine_hemisphere(hit.normal, rng);
                vertex.scatter = Scatter::Diffuse;
                chain_start = length;
            } else {
                dir = dir.reflect(hit.normal);
                vertex.scatter = Scatter::Specular;
            }
            vertex.outgoing = Some(dir);
            vertex.segment_weight = weight;
        }
        vertices.push(vertex);
        if !survive {
            break;
        }
    }
    Subpath { vertices }
}

/// Trace `config.rays_per_endpoint` subpaths from `origin`.
///
/// Subpath `i` draws from random stream `i` of `seed`, so the result does not
/// depend on the number of worker threads.
pub fn trace_subpaths(scene: &Scene, origin: Point3, config: &PropagationConfig, seed: u64) -> Vec<Subpath> {
    (0..config.rays_per_endpoint as u64)
        .into_par_iter()
        .map(|i| trace_subpath(scene, origin, config, &mut rng::stream(seed, i)))
        .collect()
}
