use rand::Rng;
use rand_distr::StandardNormal;

use super::layers::{mse, softmax_cross_entropy, Cache, Layer, Tensor};
use super::{ModelConfig, Task};

/// Targets for one batch.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    Coords(Vec<[f64; 2]>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(v) => v.len(),
            Targets::Coords(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input: [usize; 3],
    pub layers: Vec<Layer>,
}

impl Network {
    /// Conv blocks (conv, optional batch norm, ReLU, max pool), hidden
    /// dense layers with ReLU, then the head. Weights get He-normal values
    /// from `rng`, biases start at zero.
    pub fn build(config: &ModelConfig, outputs: usize, rng: &mut impl Rng) -> Network {
        let input = [1, config.input[0], config.input[1]];
        let mut layers = Vec::new();
        let mut shape = input;
        let mut he = |n: usize, fan_in: usize| -> Vec<f64> {
            let s = (2.0 / fan_in as f64).sqrt();
            (0..n).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
        };
        for block in &config.conv {
            let (i, o, k) = (shape[0], block.channels, block.kernel);
            let bias = if block.batch_norm { vec![] } else { vec![0.0; o] };
            layers.push(Layer::Conv { inputs: i, outputs: o, kernel: k, weight: he(o * i * k * k, i * k * k), bias });
            if block.batch_norm {
                layers.push(Layer::BatchNorm {
                    gamma: vec![1.0; o],
                    beta: vec![0.0; o],
                    running_mean: vec![0.0; o],
                    running_var: vec![1.0; o],
                    momentum: config.bn_momentum,
                    eps: config.bn_eps,
                });
            }
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool { size: block.pool });
            shape = layers.iter().fold(input, |s, l| l.output_shape(s));
        }
        let mut width = shape.iter().product::<usize>();
        for &units in &config.dense {
            layers.push(Layer::Dense { inputs: width, outputs: units, weight: he(units * width, width), bias: vec![0.0; units] });
            layers.push(Layer::Relu);
            width = units;
        }
        layers.push(Layer::Dense { inputs: width, outputs, weight: he(outputs * width, width), bias: vec![0.0; outputs] });
        Network { input, layers }
    }

    pub fn output_len(&self) -> usize {
        self.layers.iter().fold(self.input, |s, l| l.output_shape(s)).iter().product()
    }

    /// Raw head output (logits or standardized coordinates).
    pub fn forward(&self, x: &Tensor, train: bool) -> (Tensor, Vec<Cache>) {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (y, c) = layer.forward(&cur, train);
            caches.push(c);
            cur = y;
        }
        (cur, caches)
    }

    /// Mean loss over the batch, the input gradient and per-layer parameter
    /// gradients, using batch statistics in batch norm.
    pub fn loss_and_gradients(&self, x: &Tensor, targets: &Targets) -> (f64, Tensor, Vec<Vec<Vec<f64>>>, Vec<Cache>) {
        let (out, caches) = self.forward(x, true);
        let (loss, mut g) = match targets {
            Targets::Classes(t) => softmax_cross_entropy(&out, t),
            Targets::Coords(t) => mse(&out, t),
        };
        let mut grads = vec![Vec::new(); self.layers.len()];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (gx, gp) = layer.backward(&caches[i], &g);
            grads[i] = gp;
            g = gx;
        }
        (loss, g, grads, caches)
    }

    pub fn loss(&self, x: &Tensor, targets: &Targets) -> f64 {
        let (out, _) = self.forward(x, true);
        match targets {
            Targets::Classes(t) => softmax_cross_entropy(&out, t).0,
            Targets::Coords(t) => mse(&out, t).0,
        }
    }

    /// Fold the batch statistics of a training step into the running ones.
    pub fn update_running_stats(&mut self, caches: &[Cache]) {
        for (layer, cache) in self.layers.iter_mut().zip(caches) {
            if let (Layer::BatchNorm { running_mean, running_var, momentum, .. }, Cache::Norm { mean, var, .. }) =
                (layer, cache)
            {
                for c in 0..mean.len() {
                    running_mean[c] = *momentum * running_mean[c] + (1.0 - *momentum) * mean[c];
                    running_var[c] = *momentum * running_var[c] + (1.0 - *momentum) * var[c];
                }
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.params()).map(Vec::len).sum()
    }

    pub fn round_to_f32(&mut self) {
        for layer in &mut self.layers {
            for t in layer.tensors_mut() {
                t.iter_mut().for_each(|v| *v = *v as f32 as f64);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.params().iter().all(|t| t.iter().all(|v| v.is_finite())))
    }
}

pub(crate) fn head_outputs(task: &Task, classes: usize) -> usize {
    match task {
        Task::Regions => classes,
        Task::Coords => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::super::layers::softmax;
    use super::super::ConvBlock;
    use super::*;
    use crate::rng;

    #[test]
    fn default_architecture_shapes() {
        let config = ModelConfig::default();
        let net = Network::build(&config, 10, &mut rng::stream(1, 0));
        let names: Vec<_> = net.layers.iter().map(|l| l.name()).collect();
        assert_eq!(
            names,
            [
                "conv", "batchnorm", "relu", "maxpool", "conv", "batchnorm", "relu", "maxpool", "dense", "relu", "dense",
                "relu", "dense"
            ]
        );
        assert_eq!(net.output_len(), 10);
        let x = Tensor::new(2, [1, 64, 64], (0..2 * 4096).map(|i| (i as f64 * 0.37).sin()).collect());
        let (y, _) = net.forward(&x, true);
        assert_eq!(y.shape, [10, 1, 1]);
        let (y, _) = net.forward(&x, false);
        for s in 0..2 {
            assert!((softmax(y.sample(s)).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_dense_model_is_uniform() {
        let config = ModelConfig { conv: vec![], dense: vec![4], ..ModelConfig::default() };
        let mut net = Network::build(&config, 5, &mut rng::stream(1, 0));
        for l in &mut net.layers {
            for t in l.params_mut() {
                t.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let x = Tensor::new(1, [1, 64, 64], (0..4096).map(|i| i as f64).collect());
        let (y, _) = net.forward(&x, false);
        for p in softmax(y.sample(0)) {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_norm_drops_conv_bias() {
        let config = ModelConfig {
            conv: vec![ConvBlock { kernel: 3, channels: 2, pool: 2, batch_norm: true }],
            ..ModelConfig::default()
        };
        let net = Network::build(&config, 3, &mut rng::stream(1, 0));
        assert!(matches!(&net.layers[0], Layer::Conv { bias, .. } if bias.is_empty()));
    }
}
