//! Spectrogram localization with a small convolutional network written
//! from scratch: region classification with a softmax head, or floor
//! coordinates with a linear head.

mod features;
pub mod layers;
mod model;
mod network;
mod train;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioError;
use crate::dataset::DatasetError;

pub use features::{block_average, FeatureSet, Sample};
pub use model::{Model, MODEL_MAGIC};
pub use network::{Network, Targets};
pub use train::{predict, score, train, Output, Prediction, TrainReport, ValidationMetrics};

#[derive(Debug, Error)]
pub enum LocalizeError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("model is trained for {0}, not {1}")]
    Task(Task, Task),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Softmax over the scene's regions.
    Regions,
    /// Floor coordinates (x, z) in meters.
    Coords,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Regions => "regions",
            Task::Coords => "coords",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlock {
    pub kernel: usize,
    pub channels: usize,
    pub pool: usize,
    pub batch_norm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub task: Task,
    /// Feature grid, `[frames, bins]` after block averaging.
    pub input: [usize; 2],
    pub conv: Vec<ConvBlock>,
    /// Hidden dense widths; the head adds one more dense layer.
    pub dense: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let block = |channels| ConvBlock { kernel: 3, channels, pool: 2, batch_norm: true };
        ModelConfig {
            task: Task::Regions,
            input: [64, 64],
            conv: vec![block(8), block(16)],
            dense: vec![128, 64],
            learning_rate: 1e-2,
            momentum: 0.9,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            bn_momentum: 0.99,
            bn_eps: 1e-5,
        }
    }
}

/// Default learning rate for coordinate regression. The unbounded MSE
/// gradient diverges within a few batches at the classification rate.
pub const COORDS_LEARNING_RATE: f64 = 1e-3;

impl ModelConfig {
    /// Defaults for `task`.
    pub fn for_task(task: Task) -> ModelConfig {
        match task {
            Task::Regions => ModelConfig::default(),
            Task::Coords => ModelConfig { task, learning_rate: COORDS_LEARNING_RATE, ..ModelConfig::default() },
        }
    }

    pub fn validate(&self) -> Result<(), LocalizeError> {
        let bad = |m: String| Err(LocalizeError::Config(m));
        if self.input[0] == 0 || self.input[1] == 0 {
            return bad("input grid must be non-empty".into());
        }
        let (mut h, mut w) = (self.input[0], self.input[1]);
        for (i, b) in self.conv.iter().enumerate() {
            if b.kernel == 0 || b.kernel % 2 == 0 {
                return bad(format!("conv block {i}: kernel {} must be odd", b.kernel));
            }
            if b.channels == 0 || b.pool == 0 {
                return bad(format!("conv block {i}: channels and pool must be positive"));
            }
            h /= b.pool;
            w /= b.pool;
            if h == 0 || w == 0 {
                return bad(format!("conv block {i}: pooling leaves an empty map"));
            }
        }
        if self.dense.contains(&0) {
            return bad("dense widths must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(0.0..1.0).contains(&self.bn_momentum) {
            return bad("momentum values must be in [0, 1)".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.bn_eps > 0.0) {
            return bad("batch-norm epsilon must be positive".into());
        }
        Ok(())
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::layers::softmax;
    use super::*;

    #[test]
    fn argmax_ties_and_scaling() {
        assert_eq!(argmax(&[0.1, 0.8, 0.1]), 1);
        assert_eq!(argmax(&[0.4, 0.1, 0.1, 0.4]), 0);
        let logits = [0.3, -1.2, 2.5, 2.4];
        for scale in [0.01, 1.0, 7.0, 300.0] {
            let scaled: Vec<f64> = logits.iter().map(|v| v * scale).collect();
            assert_eq!(argmax(&softmax(&scaled)), 2);
        }
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig { batch_size: 0, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig { input: [2, 2], ..ModelConfig::default() }.validate().is_err());
        let even = ConvBlock { kernel: 2, channels: 1, pool: 1, batch_norm: false };
        assert!(ModelConfig { conv: vec![even], ..ModelConfig::default() }.validate().is_err());
    }
}
