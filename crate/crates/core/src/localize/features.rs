use std::path::Path;

use rayon::prelude::*;

use super::LocalizeError;
use crate::audio::{read_spectrogram, Spectrogram};
use crate::dataset::{sha256_file, DatasetError, DatasetManifest, Split};

/// Average `spec` over `shape[0] x shape[1]` blocks. Block `i` along an
/// axis of length `n` covers `[floor(i n / k), floor((i + 1) n / k))`.
pub fn block_average(spec: &Spectrogram, shape: [usize; 2]) -> Result<Vec<f64>, LocalizeError> {
    let [rows, cols] = shape;
    if spec.frames < rows || spec.bins < cols {
        return Err(LocalizeError::Shape {
            expected: format!("at least {rows}x{cols}"),
            found: format!("{}x{}", spec.frames, spec.bins),
        });
    }
    let edges = |n: usize, k: usize| (0..=k).map(|i| i * n / k).collect::<Vec<_>>();
    let (re, ce) = (edges(spec.frames, rows), edges(spec.bins, cols));
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut sum = 0.0;
            for f in re[r]..re[r + 1] {
                sum += spec.frame(f)[ce[c]..ce[c + 1]].iter().map(|&v| v as f64).sum::<f64>();
            }
            out.push(sum / ((re[r + 1] - re[r]) * (ce[c + 1] - ce[c])) as f64);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Manifest index; training order is derived from it.
    pub index: usize,
    pub split: Split,
    pub fold: Option<usize>,
    pub class: Option<usize>,
    /// Floor coordinates (x, z), meters.
    pub xy: [f64; 2],
    /// Block-averaged log spectrogram, not yet standardized.
    pub features: Vec<f64>,
}

/// Features for every manifest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub shape: [usize; 2],
    pub classes: Vec<String>,
    pub folds: Option<usize>,
    pub samples: Vec<Sample>,
}

impl FeatureSet {
    /// Read and block-average every spectrogram listed in `manifest`,
    /// checking each file against its recorded checksum.
    pub fn load(manifest: &DatasetManifest, dir: &Path, shape: [usize; 2]) -> Result<FeatureSet, LocalizeError> {
        let cfg = &manifest.config;
        let samples = manifest
            .entries
            .par_iter()
            .map(|e| {
                let path = dir.join(&e.path);
                match sha256_file(&path) {
                    None => {
                        return Err(LocalizeError::Dataset(DatasetError::Io {
                            path: path.clone(),
                            message: "missing spectrogram file".into(),
                        }))
                    }
                    Some(sum) if sum != e.sha256 => {
                        return Err(LocalizeError::Data(format!("{}: checksum does not match the manifest", path.display())))
                    }
                    Some(_) => {}
                }
                let spec = read_spectrogram(&path, &cfg.stft, cfg.propagation.sample_rate)?;
                Ok(Sample {
                    index: e.index,
                    split: e.split,
                    fold: e.fold,
                    class: manifest.class_of(e),
                    xy: [e.position[0], e.position[2]],
                    features: block_average(&spec, shape)?,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureSet { shape, classes: manifest.regions.clone(), folds: manifest.folds, samples })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(frames: usize, bins: usize) -> Spectrogram {
        Spectrogram {
            values: (0..frames * bins).map(|i| i as f32).collect(),
            frames,
            bins,
            hop: 160,
            window_length: 512,
            sample_rate: 16000,
        }
    }

    #[test]
    fn averages_blocks() {
        let s = spec(4, 4);
        assert_eq!(block_average(&s, [2, 2]).unwrap(), vec![2.5, 4.5, 10.5, 12.5]);
        assert_eq!(block_average(&s, [4, 4]).unwrap(), (0..16).map(|v| v as f64).collect::<Vec<_>>());
        let uneven = block_average(&spec(297, 257), [64, 64]).unwrap();
        assert_eq!(uneven.len(), 4096);
        assert!(block_average(&spec(10, 257), [64, 64]).is_err());
    }
}
