use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::{softmax, Tensor};
use super::network::{head_outputs, Network};
use super::{argmax, block_average, LocalizeError, ModelConfig, Task};
use crate::audio::Spectrogram;
use crate::dataset::sha256_hex;
use crate::rng;

pub const MODEL_MAGIC: &[u8; 6] = b"ELMDL1";

const INFERENCE_BATCH: usize = 64;

/// A trained network with the statistics needed to feed it.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    /// Class names, empty for coordinate models.
    pub classes: Vec<String>,
    /// Scalar standardization of the input features.
    pub feature_mean: f64,
    pub feature_std: f64,
    /// Per-coordinate standardization of regression targets.
    pub target_mean: [f64; 2],
    pub target_std: [f64; 2],
    pub network: Network,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    classes: Vec<String>,
    feature_mean: f64,
    feature_std: f64,
    target_mean: [f64; 2],
    target_std: [f64; 2],
    tensors: Vec<TensorInfo>,
}

#[derive(Serialize, Deserialize, PartialEq)]
struct TensorInfo {
    name: String,
    len: usize,
}

impl Model {
    pub fn input_len(&self) -> usize {
        self.config.input[0] * self.config.input[1]
    }

    fn check(&self, features: &[f64]) -> Result<(), LocalizeError> {
        if features.len() != self.input_len() {
            return Err(LocalizeError::Shape {
                expected: format!("{} features ({}x{})", self.input_len(), self.config.input[0], self.config.input[1]),
                found: format!("{}", features.len()),
            });
        }
        Ok(())
    }

    pub(crate) fn standardized<'a>(&self, features: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        let (m, s) = (self.feature_mean, self.feature_std);
        features.iter().map(move |v| (v - m) / s)
    }

    /// Class probabilities, or coordinates in meters, for each feature vector.
    pub fn forward(&self, batch: &[&[f64]]) -> Result<Vec<Vec<f64>>, LocalizeError> {
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(INFERENCE_BATCH) {
            let mut data = Vec::with_capacity(chunk.len() * self.input_len());
            for f in chunk {
                self.check(f)?;
                data.extend(self.standardized(f));
            }
            let x = Tensor::new(chunk.len(), self.network.input, data);
            let (y, _) = self.network.forward(&x, false);
            for s in 0..chunk.len() {
                let v = y.sample(s);
                out.push(match self.config.task {
                    Task::Regions => softmax(v),
                    Task::Coords => (0..2).map(|k| v[k] * self.target_std[k] + self.target_mean[k]).collect(),
                });
            }
        }
        Ok(out)
    }

    fn expect(&self, task: Task) -> Result<(), LocalizeError> {
        if self.config.task != task {
            return Err(LocalizeError::Task(self.config.task, task));
        }
        Ok(())
    }

    /// Most probable class for each feature vector; ties go to the lowest index.
    pub fn classify(&self, batch: &[&[f64]]) -> Result<Vec<usize>, LocalizeError> {
        self.expect(Task::Regions)?;
        Ok(self.forward(batch)?.iter().map(|p| argmax(p)).collect())
    }

    pub fn locate(&self, batch: &[&[f64]]) -> Result<Vec<[f64; 2]>, LocalizeError> {
        self.expect(Task::Coords)?;
        Ok(self.forward(batch)?.iter().map(|v| [v[0], v[1]]).collect())
    }

    pub fn predict_region(&self, spec: &Spectrogram) -> Result<&str, LocalizeError> {
        let f = block_average(spec, self.config.input)?;
        let c = self.classify(&[&f])?[0];
        Ok(&self.classes[c])
    }

    /// Floor coordinates (x, z) in the scene frame, meters.
    pub fn predict_xy(&self, spec: &Spectrogram) -> Result<[f64; 2], LocalizeError> {
        let f = block_average(spec, self.config.input)?;
        Ok(self.locate(&[&f])?[0])
    }

    /// `ELMDL1`, a little-endian `u32` header length, the JSON header, then
    /// every tensor as little-endian `f32` in header order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut net = self.network.clone();
        let mut tensors = Vec::new();
        let mut data = Vec::new();
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let name = layer.name();
            let labels: &[&str] = match name {
                "batchnorm" => &["gamma", "beta", "running_mean", "running_var"],
                _ => &["weight", "bias"],
            };
            for (t, label) in layer.tensors_mut().into_iter().zip(labels) {
                tensors.push(TensorInfo { name: format!("{i}.{name}.{label}"), len: t.len() });
                for v in t.iter() {
                    data.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
        }
        let header = Header {
            config: self.config.clone(),
            classes: self.classes.clone(),
            feature_mean: self.feature_mean,
            feature_std: self.feature_std,
            target_mean: self.target_mean,
            target_std: self.target_std,
            tensors,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(10 + json.len() + data.len());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model, LocalizeError> {
        let bad = |m: String| LocalizeError::Format(m);
        if bytes.len() < 10 || &bytes[..6] != MODEL_MAGIC {
            return Err(bad("missing ELMDL1 magic".into()));
        }
        let hlen = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let json = bytes.get(10..10 + hlen).ok_or_else(|| bad("truncated header".into()))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| bad(format!("header: {e}")))?;
        header.config.validate()?;
        let outputs = head_outputs(&header.config.task, header.classes.len());
        if outputs == 0 {
            return Err(bad("classification model without classes".into()));
        }
        let mut network = Network::build(&header.config, outputs, &mut rng::stream(0, 0));
        let mut data = bytes[10 + hlen..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
        let mut info = header.tensors.iter();
        let mut expected = 0;
        for layer in &mut network.layers {
            for t in layer.tensors_mut() {
                expected += t.len();
                match info.next() {
                    Some(ti) if ti.len == t.len() => {}
                    Some(ti) => return Err(bad(format!("tensor {} has {} values, config implies {}", ti.name, ti.len, t.len()))),
                    None => return Err(bad("fewer tensors than the config implies".into())),
                }
                for v in t.iter_mut() {
                    *v = data.next().ok_or_else(|| bad("truncated tensor data".into()))?;
                }
            }
        }
        if info.next().is_some() || bytes.len() != 10 + hlen + 4 * expected {
            return Err(bad("more data than the config implies".into()));
        }
        Ok(Model {
            config: header.config,
            classes: header.classes,
            feature_mean: header.feature_mean,
            feature_std: header.feature_std,
            target_mean: header.target_mean,
            target_std: header.target_std,
            network,
        })
    }

    pub fn checksum(&self) -> String {
        sha256_hex(&self.to_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), LocalizeError> {
        std::fs::write(path, self.to_bytes())
            .map_err(|e| LocalizeError::Io { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Model, LocalizeError> {
        let bytes =
            std::fs::read(path).map_err(|e| LocalizeError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        Model::from_bytes(&bytes)
    }
}
