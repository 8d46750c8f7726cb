//! Source placements, batch rendering of spectrograms and train/test
//! manifests with cross-validation folds.

mod folds;
mod grid;
mod render;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::{AudioError, StftConfig};
use crate::propagation::{PropagationConfig, PropagationError};
use crate::scene::{Point3, SceneError};

pub use folds::assign_folds;
pub use grid::{coordinate_grid, coordinate_grid_size, offset_test_grid, region_grid, COINCIDENCE, WALL_CLEARANCE};
pub use render::{prepare_dry, render_dataset, Progress, SPEC_DIR};

pub const MANIFEST_FORMAT: &str = "echoloc-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{0}")]
    Invalid(String),
    #[error("coverage: {0}")]
    Coverage(String),
    #[error("folds: {0}")]
    Folds(String),
    #[error("placement {index}: {source}")]
    Propagation {
        index: usize,
        #[source]
        source: PropagationError,
    },
    #[error("placement {index}: {source}")]
    Audio {
        index: usize,
        #[source]
        source: AudioError,
    },
    #[error("dry sound: {0}")]
    Dry(#[source] AudioError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> DatasetError {
        DatasetError::Io { path: path.to_path_buf(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourcePlacement {
    pub position: Point3,
    pub region: Option<String>,
    pub split: Split,
}

/// Everything that affects the rendered files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub propagation: PropagationConfig,
    pub stft: StftConfig,
    /// Peak level of the dry sound before loudness normalization, dBFS.
    pub dry_peak_db: f64,
    /// Integrated loudness of the dry sound, LUFS.
    pub dry_lufs: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            propagation: PropagationConfig::default(),
            stft: StftConfig::default(),
            dry_peak_db: -1.0,
            dry_lufs: -15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub position: [f64; 3],
    pub region: Option<String>,
    pub split: Split,
    /// Spectrogram file relative to the manifest directory.
    pub path: String,
    pub sha256: String,
    /// Anti-clip gain applied after convolution.
    pub gain: f64,
    /// Cross-validation fold, train entries only.
    pub fold: Option<usize>,
}

impl ManifestEntry {
    pub fn position(&self) -> Point3 {
        Point3::new(self.position[0], self.position[1], self.position[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub scene_sha256: String,
    pub dry_sha256: String,
    pub config: RenderConfig,
    /// Class names in scene order; class `i` is `regions[i]`.
    pub regions: Vec<String>,
    /// Fold count, once folds are assigned.
    pub folds: Option<usize>,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn train(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.split == Split::Train)
    }

    pub fn test(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.split == Split::Test)
    }

    pub fn class_of(&self, entry: &ManifestEntry) -> Option<usize> {
        let name = entry.region.as_deref()?;
        self.regions.iter().position(|r| r == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_json()).map_err(|e| DatasetError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<DatasetManifest, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        let m: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| DatasetError::Manifest { path: path.to_path_buf(), message: e.to_string() })?;
        if m.format != MANIFEST_FORMAT {
            return Err(DatasetError::Manifest {
                path: path.to_path_buf(),
                message: format!("unsupported format `{}`", m.format),
            });
        }
        Ok(m)
    }
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Option<String> {
    std::fs::read(path).ok().map(|b| sha256_hex(&b))
}
