use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::layers::Tensor;
use super::network::{head_outputs, Network, Targets};
use super::{FeatureSet, LocalizeError, Model, ModelConfig, Sample, Task};
use crate::dataset::Split;
use crate::eval::{self, ClassMetrics, RegressionError};
use crate::rng::{self, tags};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Region(usize),
    Coords([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub index: usize,
    pub truth: Output,
    pub predicted: Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValidationMetrics {
    Regions(ClassMetrics),
    Coords(RegressionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Held-out fold, or `None` when every train sample was used.
    pub fold: Option<usize>,
    pub train_samples: usize,
    /// Mean training loss of each epoch.
    pub epoch_loss: Vec<f64>,
    /// Held-out predictions ordered by manifest index.
    pub validation: Vec<Prediction>,
    pub metrics: Option<ValidationMetrics>,
}

fn truth(task: Task, s: &Sample) -> Output {
    match task {
        Task::Regions => Output::Region(s.class.expect("labeled sample")),
        Task::Coords => Output::Coords(s.xy),
    }
}

/// Predict every sample with `model`, keeping the input order.
pub fn predict(model: &Model, samples: &[&Sample]) -> Result<Vec<Prediction>, LocalizeError> {
    let feats: Vec<&[f64]> = samples.iter().map(|s| s.features.as_slice()).collect();
    let outputs: Vec<Output> = match model.config.task {
        Task::Regions => model.classify(&feats)?.into_iter().map(Output::Region).collect(),
        Task::Coords => model.locate(&feats)?.into_iter().map(Output::Coords).collect(),
    };
    Ok(samples
        .iter()
        .zip(outputs)
        .map(|(s, predicted)| Prediction { index: s.index, truth: truth(model.config.task, s), predicted })
        .collect())
}

/// Metrics of a set of predictions.
pub fn score(task: Task, classes: usize, predictions: &[Prediction]) -> Result<ValidationMetrics, eval::EvalError> {
    match task {
        Task::Regions => {
            let (mut p, mut t) = (Vec::new(), Vec::new());
            for pr in predictions {
                if let (Output::Region(a), Output::Region(b)) = (pr.predicted, pr.truth) {
                    p.push(a);
                    t.push(b);
                }
            }
            Ok(ValidationMetrics::Regions(eval::metrics(&eval::confusion(&p, &t, classes)?)?))
        }
        Task::Coords => {
            let (mut p, mut t) = (Vec::new(), Vec::new());
            for pr in predictions {
                if let (Output::Coords(a), Output::Coords(b)) = (pr.predicted, pr.truth) {
                    p.push(a);
                    t.push(b);
                }
            }
            Ok(ValidationMetrics::Coords(eval::regression_error(&p, &t)?))
        }
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

/// Mini-batch SGD with momentum on the train split, holding out `fold`
/// when given.
///
/// Samples are ordered by manifest index before the seeded per-epoch
/// shuffle, so the result depends only on the data and the config.
/// Parameters are rounded to `f32` at the end so the saved model is exact.
pub fn train(config: &ModelConfig, set: &FeatureSet, fold: Option<usize>) -> Result<(Model, TrainReport), LocalizeError> {
    config.validate()?;
    if set.shape != config.input {
        return Err(LocalizeError::Shape {
            expected: format!("{}x{} features", config.input[0], config.input[1]),
            found: format!("{}x{}", set.shape[0], set.shape[1]),
        });
    }
    let data_err = |m: String| Err(LocalizeError::Data(m));
    if let Some(f) = fold {
        match set.folds {
            None => return data_err("folds are not assigned".into()),
            Some(k) if f >= k => return data_err(format!("fold {f} is out of range for {k} folds")),
            _ => {}
        }
    }
    let mut train: Vec<&Sample> = Vec::new();
    let mut held: Vec<&Sample> = Vec::new();
    for s in set.samples.iter().filter(|s| s.split == Split::Train) {
        if config.task == Task::Regions && s.class.is_none() {
            return data_err(format!("sample {} has no region label", s.index));
        }
        match (fold, s.fold) {
            (Some(_), None) => return data_err(format!("sample {} has no fold", s.index)),
            (Some(f), Some(g)) if f == g => held.push(s),
            _ => train.push(s),
        }
    }
    if train.is_empty() {
        return data_err("no training samples".into());
    }
    train.sort_by_key(|s| s.index);
    held.sort_by_key(|s| s.index);

    let outputs = head_outputs(&config.task, set.classes.len());
    if outputs == 0 {
        return data_err("no classes to predict".into());
    }
    let (feature_mean, feature_std) = mean_std(train.iter().flat_map(|s| s.features.iter().copied()));
    let mut target_mean = [0.0; 2];
    let mut target_std = [1.0; 2];
    if config.task == Task::Coords {
        for k in 0..2 {
            (target_mean[k], target_std[k]) = mean_std(train.iter().map(|s| s.xy[k]));
        }
    }
    let mut network = Network::build(config, outputs, &mut rng::stream(rng::derive_seed(config.seed, tags::INIT), 0));
    let mut model = Model {
        config: config.clone(),
        classes: if config.task == Task::Regions { set.classes.clone() } else { Vec::new() },
        feature_mean,
        feature_std,
        target_mean,
        target_std,
        network: network.clone(),
    };

    let width = config.input[0] * config.input[1];
    let inputs: Vec<Vec<f64>> = train.iter().map(|s| model.standardized(&s.features).collect()).collect();
    let mut velocity: Vec<Vec<Vec<f64>>> =
        network.layers.iter().map(|l| l.params().iter().map(|t| vec![0.0; t.len()]).collect()).collect();
    let shuffle = rng::derive_seed(config.seed, tags::SHUFFLE);
    let mut epoch_loss = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::stream(shuffle, epoch as u64));
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut x = Vec::with_capacity(batch.len() * width);
            batch.iter().for_each(|&i| x.extend_from_slice(&inputs[i]));
            let x = Tensor::new(batch.len(), network.input, x);
            let targets = match config.task {
                Task::Regions => Targets::Classes(batch.iter().map(|&i| train[i].class.expect("labeled")).collect()),
                Task::Coords => Targets::Coords(
                    batch
                        .iter()
                        .map(|&i| {
                            let xy = train[i].xy;
                            [(xy[0] - target_mean[0]) / target_std[0], (xy[1] - target_mean[1]) / target_std[1]]
                        })
                        .collect(),
                ),
            };
            let (loss, _, grads, caches) = network.loss_and_gradients(&x, &targets);
            if !loss.is_finite() {
                return Err(LocalizeError::Diverged { epoch, batch: b, loss });
            }
            network.update_running_stats(&caches);
            for ((layer, grads), vel) in network.layers.iter_mut().zip(&grads).zip(&mut velocity) {
                for ((p, g), v) in layer.params_mut().into_iter().zip(grads).zip(vel) {
                    for k in 0..p.len() {
                        v[k] = config.momentum * v[k] + g[k];
                        p[k] -= config.learning_rate * v[k];
                    }
                }
            }
            total += loss * batch.len() as f64;
        }
        let mean = total / train.len() as f64;
        if !network.is_finite() {
            return Err(LocalizeError::Diverged { epoch, batch: order.len().div_ceil(config.batch_size), loss: mean });
        }
        epoch_loss.push(mean);
    }

    network.round_to_f32();
    model.network = network;
    let validation = predict(&model, &held)?;
    let metrics = if validation.is_empty() { None } else { score(config.task, outputs, &validation).ok() };
    let report = TrainReport { fold, train_samples: train.len(), epoch_loss, validation, metrics };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localize::ConvBlock;
    use rand::Rng;

    /// Two classes: a bright horizontal band present or absent, plus noise.
    pub(crate) fn band_set(n: usize, shape: [usize; 2], seed: u64) -> FeatureSet {
        let mut r = rng::stream(seed, 0);
        let samples = (0..n)
            .map(|i| {
                let class = i % 2;
                let features = (0..shape[0] * shape[1])
                    .map(|k| {
                        let row = k / shape[1];
                        let band = if class == 1 && row >= shape[0] / 3 && row < shape[0] / 2 { 10.0 } else { 0.0 };
                        -50.0 + band + r.random_range(-3.0..3.0)
                    })
                    .collect();
                Sample { index: i, split: Split::Train, fold: Some(i % 4 / 2), class: Some(class), xy: [0.0, 0.0], features }
            })
            .collect();
        FeatureSet { shape, classes: vec!["absent".into(), "present".into()], folds: Some(2), samples }
    }

    fn small_config() -> ModelConfig {
        ModelConfig {
            input: [16, 16],
            conv: vec![
                ConvBlock { kernel: 3, channels: 4, pool: 2, batch_norm: true },
                ConvBlock { kernel: 3, channels: 4, pool: 2, batch_norm: true },
            ],
            dense: vec![16, 8],
            epochs: 20,
            batch_size: 8,
            seed: 3,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn separable_bands() {
        let set = band_set(64, [16, 16], 1);
        let (model, report) = train(&small_config(), &set, Some(0)).unwrap();
        assert_eq!(report.train_samples, 32);
        assert!(report.epoch_loss.iter().all(|l| l.is_finite()));
        match report.metrics.unwrap() {
            ValidationMetrics::Regions(m) => assert!(m.macro_f1 >= 0.95, "{}", m.macro_f1),
            _ => unreachable!(),
        }
        assert!(model.network.is_finite());
    }

    #[test]
    fn deterministic_and_order_free() {
        let set = band_set(24, [16, 16], 2);
        let config = ModelConfig { epochs: 3, ..small_config() };
        let (a, ra) = train(&config, &set, None).unwrap();
        let (b, _) = train(&config, &set, None).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let mut shuffled = set.clone();
        shuffled.samples.reverse();
        let (c, rc) = train(&config, &shuffled, None).unwrap();
        assert_eq!(a.checksum(), c.checksum());
        assert_eq!(ra.epoch_loss, rc.epoch_loss);
        let (d, _) = train(&ModelConfig { seed: 4, ..config }, &set, None).unwrap();
        assert_ne!(a.checksum(), d.checksum());
    }

    #[test]
    fn zero_epochs_is_initialization() {
        let set = band_set(8, [16, 16], 3);
        let config = ModelConfig { epochs: 0, ..small_config() };
        let (m, r) = train(&config, &set, None).unwrap();
        assert!(r.epoch_loss.is_empty());
        let mut init = Network::build(&config, 2, &mut rng::stream(rng::derive_seed(3, tags::INIT), 0));
        init.round_to_f32();
        assert_eq!(m.network, init);
    }

    #[test]
    fn linear_regression_loss_decreases() {
        // Dense-only, full batch, no momentum: plain gradient descent on a
        // convex quadratic.
        let mut r = rng::stream(5, 0);
        let samples = (0..40)
            .map(|i| {
                let features: Vec<f64> = (0..16).map(|_| r.random_range(-1.0..1.0)).collect();
                let xy = [features[0] * 2.0 + features[3], features[5] - 0.5 * features[7] + 3.0];
                Sample { index: i, split: Split::Train, fold: None, class: None, xy, features }
            })
            .collect();
        let set = FeatureSet { shape: [4, 4], classes: vec![], folds: None, samples };
        let config = ModelConfig {
            task: Task::Coords,
            input: [4, 4],
            conv: vec![],
            dense: vec![],
            learning_rate: 0.05,
            momentum: 0.0,
            batch_size: 40,
            epochs: 60,
            ..ModelConfig::default()
        };
        let (_, report) = train(&config, &set, None).unwrap();
        for w in report.epoch_loss.windows(2) {
            assert!(w[1] <= w[0], "{:?}", report.epoch_loss);
        }
        assert!(report.epoch_loss.last().unwrap() < &(0.5 * report.epoch_loss[0]));
    }

    #[test]
    fn divergence_and_bad_input() {
        let set = band_set(16, [16, 16], 4);
        let wild = ModelConfig {
            task: Task::Coords,
            conv: vec![],
            dense: vec![],
            learning_rate: 1e6,
            epochs: 200,
            ..small_config()
        };
        let mut moving = set.clone();
        moving.samples.iter_mut().for_each(|s| s.xy = [s.index as f64, 1.0]);
        assert!(matches!(train(&wild, &moving, None), Err(LocalizeError::Diverged { .. })));
        assert!(matches!(train(&small_config(), &set, Some(7)), Err(LocalizeError::Data(_))));
        let wrong = ModelConfig { input: [8, 8], ..small_config() };
        assert!(matches!(train(&wrong, &set, None), Err(LocalizeError::Shape { .. })));
    }
}
