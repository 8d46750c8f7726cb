use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    sha256_file, sha256_hex, DatasetError, DatasetManifest, ManifestEntry, RenderConfig, SourcePlacement, Split,
    COINCIDENCE, MANIFEST_FILE, MANIFEST_FORMAT,
};
use crate::audio::{self, AudioClip, AudioError};
use crate::propagation::simulate_rir;
use crate::rng::{self, tags};
use crate::scene::Scene;

/// Spectrogram subdirectory of a dataset.
pub const SPEC_DIR: &str = "spec";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Rendered(usize),
    /// An existing file with a matching checksum was kept.
    Skipped(usize),
}

/// Peak-normalize, then loudness-normalize the dry sound.
pub fn prepare_dry(dry: &AudioClip, config: &RenderConfig) -> Result<AudioClip, AudioError> {
    let peaked = audio::peak_normalize(dry, config.dry_peak_db)?;
    audio::loudness_normalize(&peaked, config.dry_lufs)
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    index: usize,
    position: [f64; 3],
    region: Option<String>,
    split: Split,
    sample_rate: u32,
    window_length: usize,
    hop: usize,
    frames: usize,
    bins: usize,
    gain: f64,
    /// Hash of everything the file depends on.
    key: String,
    sha256: String,
}

fn dry_checksum(dry: &AudioClip) -> String {
    let mut bytes = Vec::with_capacity(4 + 8 * dry.len());
    bytes.extend_from_slice(&dry.sample_rate.to_le_bytes());
    for s in &dry.samples {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    sha256_hex(&bytes)
}

fn validate(scene: &Scene, placements: &[SourcePlacement]) -> Result<(), DatasetError> {
    for (i, p) in placements.iter().enumerate() {
        if !scene.bounding_box().contains(p.position) {
            return Err(DatasetError::Invalid(format!("placement {i} lies outside the scene")));
        }
        let label = scene.region_of(p.position)?;
        if let Some(region) = &p.region {
            if label != Some(region.as_str()) {
                return Err(DatasetError::Invalid(format!(
                    "placement {i} is labeled `{region}` but lies in {}",
                    label.map_or("no region".to_string(), |l| format!("`{l}`"))
                )));
            }
        }
    }
    let train: Vec<_> = placements.iter().filter(|p| p.split == Split::Train).collect();
    for (i, p) in placements.iter().enumerate().filter(|(_, p)| p.split == Split::Test) {
        if train.iter().any(|t| t.position.distance(p.position) <= COINCIDENCE) {
            return Err(DatasetError::Invalid(format!("test placement {i} coincides with a train placement")));
        }
    }
    Ok(())
}

/// Render every placement to `<out>/spec/<index>.bin` with a JSON sidecar
/// and write `<out>/manifest.json`.
///
/// Files whose sidecar matches the current inputs and whose checksum still
/// validates are kept. Placements render in parallel; the manifest is
/// ordered by index and has no timestamps, so identical inputs give an
/// identical manifest.
pub fn render_dataset(
    scene: &Scene,
    placements: &[SourcePlacement],
    dry: &AudioClip,
    config: &RenderConfig,
    out: &Path,
    progress: &(dyn Fn(Progress) + Sync),
) -> Result<DatasetManifest, DatasetError> {
    config.propagation.validate().map_err(|e| DatasetError::Invalid(e.to_string()))?;
    if dry.sample_rate != config.propagation.sample_rate {
        return Err(DatasetError::Dry(AudioError::RateMismatch(dry.sample_rate, config.propagation.sample_rate)));
    }
    validate(scene, placements)?;
    let prepared = prepare_dry(dry, config).map_err(DatasetError::Dry)?;

    let scene_sha256 = sha256_hex(scene.to_json().as_bytes());
    let dry_sha256 = dry_checksum(dry);
    let config_json = serde_json::to_string(config).expect("config serializes");
    let spec_dir = out.join(SPEC_DIR);
    std::fs::create_dir_all(&spec_dir).map_err(|e| DatasetError::io(&spec_dir, e))?;

    let results: Vec<Result<ManifestEntry, DatasetError>> = placements
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            let position = p.position.to_array();
            let key = sha256_hex(
                serde_json::json!([scene_sha256, dry_sha256, config_json, index, position]).to_string().as_bytes(),
            );
            let rel = format!("{SPEC_DIR}/{index}.bin");
            let bin = out.join(&rel);
            let side = spec_dir.join(format!("{index}.json"));
            let entry = |sha256: String, gain: f64| ManifestEntry {
                index,
                position,
                region: p.region.clone(),
                split: p.split,
                path: rel.clone(),
                sha256,
                gain,
                fold: None,
            };

            let existing = std::fs::read_to_string(&side).ok().and_then(|t| serde_json::from_str::<Sidecar>(&t).ok());
            if let Some(s) = existing {
                if s.key == key && sha256_file(&bin).as_deref() == Some(s.sha256.as_str()) {
                    progress(Progress::Skipped(index));
                    return Ok(entry(s.sha256, s.gain));
                }
            }

            let mut prop = config.propagation.clone();
            prop.seed = rng::derive_seed(rng::derive_seed(config.propagation.seed, tags::PLACEMENT), index as u64);
            let ir = simulate_rir(scene, p.position, &prop)
                .map_err(|source| DatasetError::Propagation { index, source })?;
            let wrap = |source| DatasetError::Audio { index, source };
            let wet = audio::convolve(&prepared, &ir).map_err(wrap)?;
            let spec = audio::stft(&wet.clip, &config.stft).map_err(wrap)?;
            let bytes = audio::encode_spectrogram(&spec);
            let sha256 = sha256_hex(&bytes);
            std::fs::write(&bin, &bytes).map_err(|e| DatasetError::io(&bin, e))?;
            let sidecar = Sidecar {
                index,
                position,
                region: p.region.clone(),
                split: p.split,
                sample_rate: spec.sample_rate,
                window_length: spec.window_length,
                hop: spec.hop,
                frames: spec.frames,
                bins: spec.bins,
                gain: wet.gain,
                key,
                sha256: sha256.clone(),
            };
            let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
            std::fs::write(&side, text).map_err(|e| DatasetError::io(&side, e))?;
            progress(Progress::Rendered(index));
            Ok(entry(sha256, wet.gain))
        })
        .collect();

    let entries = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let manifest = DatasetManifest {
        format: MANIFEST_FORMAT.to_string(),
        scene_sha256,
        dry_sha256,
        config: config.clone(),
        regions: scene.regions().iter().map(|r| r.name.clone()).collect(),
        folds: None,
        entries,
    };
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}
