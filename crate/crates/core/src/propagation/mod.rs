//! Room impulse responses by Monte Carlo bidirectional path tracing.
//!
//! Subpaths are traced from the source and from the receiver, joined by
//! [`connect`], and their energies binned to the nearest output sample.
//! Ray `n` always draws from random stream `n`, and rays are reduced in
//! fixed-size chunks summed in index order, so a result depends only on the
//! scene, the source and the configuration.

mod connect;
mod image_source;
mod schroeder;
mod subpath;

use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, tags};
use crate::scene::{Point3, Scene};

pub use connect::{connect, Contribution};
pub use image_source::{image_source_rir, image_sources, ImageSource};
pub use schroeder::schroeder_curve;
pub use subpath::{trace_subpath, trace_subpaths, PathVertex, Scatter, Subpath, MIN_ENERGY};

/// Closest allowed source-receiver distance, meters.
pub const MIN_SOURCE_DISTANCE: f64 = 1e-3;

const CHUNK: usize = 4096;

#[derive(Debug, Error)]
pub enum PropagationError {
    #[error("invalid propagation config: {0}")]
    Config(String),
    #[error("source {0:?} lies outside the scene bounds")]
    SourceOutside([f64; 3]),
    #[error("receiver {0:?} lies outside the room")]
    ReceiverOutside([f64; 3]),
    #[error("source is {0:.2e} m from the receiver (minimum {MIN_SOURCE_DISTANCE} m)")]
    Coincident(f64),
    #[error("energy decay is undefined for an all-zero impulse response")]
    UndefinedDecay,
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub sample_rate: u32,
    /// m/s
    pub speed_of_sound: f64,
    pub rays_per_endpoint: usize,
    pub max_bounces: usize,
    /// seconds
    pub rir_duration: f64,
    pub seed: u64,
    /// First bounce at which Russian roulette may end a subpath.
    pub russian_roulette_start: usize,
    /// Radius of the capture spheres around both endpoints that collect
    /// specular chains, meters.
    pub capture_radius: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            sample_rate: 16_000,
            speed_of_sound: 343.0,
            rays_per_endpoint: 100_000,
            max_bounces: 50,
            rir_duration: 1.0,
            seed: 0,
            russian_roulette_start: 8,
            capture_radius: 0.5,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<(), PropagationError> {
        let bad = |m: &str| Err(PropagationError::Config(m.to_string()));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive");
        }
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            return bad("speed_of_sound must be positive");
        }
        if self.rays_per_endpoint == 0 {
            return bad("rays_per_endpoint must be at least 1");
        }
        if !(self.rir_duration > 0.0 && self.rir_duration.is_finite()) {
            return bad("rir_duration must be positive");
        }
        if !(self.capture_radius > 0.0 && self.capture_radius.is_finite()) {
            return bad("capture_radius must be positive");
        }
        if self.output_len() == 0 {
            return bad("rir_duration is shorter than one sample");
        }
        Ok(())
    }

    /// Number of output samples, `round(rir_duration * sample_rate)`.
    pub fn output_len(&self) -> usize {
        (self.rir_duration * self.sample_rate as f64).round() as usize
    }
}

/// Pressure response at the receiver to a unit-strength source; a source
/// 1 m away in free field gives a peak of `1 / (4 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl ImpulseResponse {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    /// Index and value of the largest absolute sample (first on ties).
    pub fn peak(&self) -> (usize, f64) {
        self.samples
            .iter()
            .enumerate()
            .fold((0, 0.0), |best, (i, &x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
    }

    fn from_energy(bins: &[f64], scale: f64, sample_rate: u32) -> ImpulseResponse {
        ImpulseResponse { samples: bins.iter().map(|e| (e * scale).sqrt()).collect(), sample_rate }
    }
}

fn bin(delay: f64, sample_rate: u32) -> usize {
    (delay * sample_rate as f64).round() as usize
}

/// Simulate the impulse response from `source` to the scene's receiver.
pub fn simulate_rir(scene: &Scene, source: Point3, config: &PropagationConfig) -> Result<ImpulseResponse, PropagationError> {
    config.validate()?;
    if !scene.bounding_box().contains(source) || !source.is_finite() {
        return Err(PropagationError::SourceOutside(source.to_array()));
    }
    let receiver = scene.receiver().position;
    let distance = source.distance(receiver);
    if distance < MIN_SOURCE_DISTANCE {
        return Err(PropagationError::Coincident(distance));
    }

    let len = config.output_len();
    let fs = config.sample_rate;
    let source_seed = rng::derive_seed(config.seed, tags::SOURCE_PATHS);
    let receiver_seed = rng::derive_seed(config.seed, tags::RECEIVER_PATHS);
    let rays = config.rays_per_endpoint;

    let chunks: Vec<Vec<f64>> = (0..rays.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut hist = vec![0.0; len];
            let mut joiner = connect::Joiner::new(scene, config);
            for n in c * CHUNK..((c + 1) * CHUNK).min(rays) {
                let s = trace_subpath(scene, source, config, &mut rng::stream(source_seed, n as u64));
                let r = trace_subpath(scene, receiver, config, &mut rng::stream(receiver_seed, n as u64));
                joiner.join(&s.vertices, &r.vertices, |delay, energy| {
                    let i = bin(delay, fs);
                    if i < len {
                        hist[i] += energy;
                    }
                });
            }
            hist
        })
        .collect();

    let mut total = vec![0.0; len];
    for hist in &chunks {
        for (t, h) in total.iter_mut().zip(hist) {
            *t += h;
        }
    }
    Ok(ImpulseResponse::from_energy(&total, 1.0 / rays as f64, fs))
}

/// Provenance written next to an exported impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RirSidecar {
    pub format: String,
    pub source: [f64; 3],
    pub receiver: [f64; 3],
    /// sha256 of the scene file, or of the canonical scene JSON.
    pub scene_sha256: String,
    pub samples: usize,
    pub sample_rate: u32,
    pub config: PropagationConfig,
    /// `"path-tracing"` or `"image-source"`.
    pub method: String,
}

pub const RIR_SIDECAR_FORMAT: &str = "echoloc-rir/1";

/// Write `ir` as a 32-bit float WAV plus `<path>.json` with `sidecar`.
pub fn write_rir(path: &Path, ir: &ImpulseResponse, sidecar: &RirSidecar) -> Result<(), PropagationError> {
    let io_err = |p: &Path, e: &dyn std::fmt::Display| PropagationError::Io { path: p.to_path_buf(), message: e.to_string() };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: ir.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| io_err(path, &e))?;
    for &x in &ir.samples {
        w.write_sample(x as f32).map_err(|e| io_err(path, &e))?;
    }
    w.finalize().map_err(|e| io_err(path, &e))?;

    let side = sidecar_path(path);
    let mut text = serde_json::to_string_pretty(sidecar).map_err(|e| io_err(&side, &e))?;
    text.push('\n');
    std::fs::write(&side, text).map_err(|e: io::Error| io_err(&side, &e))
}

/// `rir.wav` -> `rir.wav.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}
