//! Layers with hand-written backward passes.
//!
//! Activations are batches of `channels x height x width` maps stored
//! sample-major. Dense layers see each sample as a flat vector.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    /// `[channels, height, width]`
    pub shape: [usize; 3],
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(n: usize, shape: [usize; 3], data: Vec<f64>) -> Tensor {
        assert_eq!(data.len(), n * shape[0] * shape[1] * shape[2], "tensor data does not match its shape");
        Tensor { n, shape, data }
    }

    pub fn zeros(n: usize, shape: [usize; 3]) -> Tensor {
        Tensor::new(n, shape, vec![0.0; n * shape[0] * shape[1] * shape[2]])
    }

    pub fn sample_len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let s = self.sample_len();
        &self.data[i * s..(i + 1) * s]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    /// Square kernel, stride 1, zero padding that keeps the map size. The
    /// bias is empty when a batch norm follows.
    Conv { inputs: usize, outputs: usize, kernel: usize, weight: Vec<f64>, bias: Vec<f64> },
    /// Per-channel normalization. Batch statistics while training, running
    /// averages otherwise.
    BatchNorm {
        gamma: Vec<f64>,
        beta: Vec<f64>,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
        momentum: f64,
        eps: f64,
    },
    Relu,
    /// Non-overlapping `size x size` max pooling; trailing rows and columns
    /// that do not fill a window are dropped. Ties go to the first element.
    MaxPool { size: usize },
    Dense { inputs: usize, outputs: usize, weight: Vec<f64>, bias: Vec<f64> },
}

/// What a layer needs from its forward pass to run backward.
#[derive(Debug, Clone)]
pub enum Cache {
    Input(Tensor),
    Norm { xhat: Vec<f64>, inv_std: Vec<f64>, mean: Vec<f64>, var: Vec<f64> },
    Mask(Vec<bool>),
    Argmax { input_shape: [usize; 3], index: Vec<usize> },
}

impl Layer {
    pub fn output_shape(&self, s: [usize; 3]) -> [usize; 3] {
        match self {
            Layer::Conv { outputs, .. } => [*outputs, s[1], s[2]],
            Layer::BatchNorm { .. } | Layer::Relu => s,
            Layer::MaxPool { size } => [s[0], s[1] / size, s[2] / size],
            Layer::Dense { outputs, .. } => [*outputs, 1, 1],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv { .. } => "conv",
            Layer::BatchNorm { .. } => "batchnorm",
            Layer::Relu => "relu",
            Layer::MaxPool { .. } => "maxpool",
            Layer::Dense { .. } => "dense",
        }
    }

    /// Trainable tensors in serialization order.
    pub fn params(&self) -> Vec<&Vec<f64>> {
        match self {
            Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } => vec![weight, bias],
            Layer::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } => vec![weight, bias],
            Layer::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            _ => vec![],
        }
    }

    /// Trainable tensors followed by non-trainable state.
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::BatchNorm { gamma, beta, running_mean, running_var, .. } => {
                vec![gamma, beta, running_mean, running_var]
            }
            other => other.params_mut(),
        }
    }

    pub fn forward(&self, x: &Tensor, train: bool) -> (Tensor, Cache) {
        match self {
            Layer::Conv { inputs, outputs, kernel, weight, bias } => {
                assert_eq!(x.shape[0], *inputs, "conv input channels");
                let [_, h, w] = x.shape;
                let mut y = Tensor::zeros(x.n, [*outputs, h, w]);
                for s in 0..x.n {
                    let xin = x.sample(s);
                    let out = &mut y.data[s * outputs * h * w..(s + 1) * outputs * h * w];
                    for o in 0..*outputs {
                        let plane = &mut out[o * h * w..(o + 1) * h * w];
                        if !bias.is_empty() {
                            plane.iter_mut().for_each(|v| *v = bias[o]);
                        }
                        for i in 0..*inputs {
                            let src = &xin[i * h * w..(i + 1) * h * w];
                            let kw = &weight[(o * inputs + i) * kernel * kernel..][..kernel * kernel];
                            shifted_acc(plane, src, kw, *kernel, h, w);
                        }
                    }
                }
                (y, Cache::Input(x.clone()))
            }
            Layer::BatchNorm { gamma, beta, running_mean, running_var, eps, .. } => {
                let [c, h, w] = x.shape;
                let hw = h * w;
                let m = (x.n * hw) as f64;
                let (mean, var) = if train {
                    let mut mean = vec![0.0; c];
                    let mut var = vec![0.0; c];
                    for s in 0..x.n {
                        for ch in 0..c {
                            mean[ch] += x.sample(s)[ch * hw..(ch + 1) * hw].iter().sum::<f64>();
                        }
                    }
                    mean.iter_mut().for_each(|v| *v /= m);
                    for s in 0..x.n {
                        for ch in 0..c {
                            var[ch] += x.sample(s)[ch * hw..(ch + 1) * hw].iter().map(|v| (v - mean[ch]).powi(2)).sum::<f64>();
                        }
                    }
                    var.iter_mut().for_each(|v| *v /= m);
                    (mean, var)
                } else {
                    (running_mean.clone(), running_var.clone())
                };
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
                let mut xhat = vec![0.0; x.data.len()];
                let mut y = Tensor::zeros(x.n, x.shape);
                for s in 0..x.n {
                    for ch in 0..c {
                        let base = s * c * hw + ch * hw;
                        for k in base..base + hw {
                            xhat[k] = (x.data[k] - mean[ch]) * inv_std[ch];
                            y.data[k] = gamma[ch] * xhat[k] + beta[ch];
                        }
                    }
                }
                (y, Cache::Norm { xhat, inv_std, mean, var })
            }
            Layer::Relu => {
                let mask: Vec<bool> = x.data.iter().map(|&v| v > 0.0).collect();
                let data = x.data.iter().map(|&v| v.max(0.0)).collect();
                (Tensor::new(x.n, x.shape, data), Cache::Mask(mask))
            }
            Layer::MaxPool { size } => {
                let p = *size;
                let [c, h, w] = x.shape;
                let (oh, ow) = (h / p, w / p);
                let mut y = Tensor::zeros(x.n, [c, oh, ow]);
                let mut index = vec![0; y.data.len()];
                let mut k = 0;
                for s in 0..x.n {
                    for ch in 0..c {
                        let base = s * c * h * w + ch * h * w;
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let mut best = base + oy * p * w + ox * p;
                                for dy in 0..p {
                                    for dx in 0..p {
                                        let j = base + (oy * p + dy) * w + ox * p + dx;
                                        if x.data[j] > x.data[best] {
                                            best = j;
                                        }
                                    }
                                }
                                y.data[k] = x.data[best];
                                index[k] = best;
                                k += 1;
                            }
                        }
                    }
                }
                (y, Cache::Argmax { input_shape: x.shape, index })
            }
            Layer::Dense { inputs, outputs, weight, bias } => {
                assert_eq!(x.sample_len(), *inputs, "dense input size");
                let mut y = Tensor::zeros(x.n, [*outputs, 1, 1]);
                for s in 0..x.n {
                    let xin = x.sample(s);
                    for o in 0..*outputs {
                        y.data[s * outputs + o] = bias[o] + dot(&weight[o * inputs..(o + 1) * inputs], xin);
                    }
                }
                (y, Cache::Input(x.clone()))
            }
        }
    }

    /// Gradient with respect to the input, and to each tensor of
    /// [`Layer::params`] in order.
    pub fn backward(&self, cache: &Cache, gy: &Tensor) -> (Tensor, Vec<Vec<f64>>) {
        match (self, cache) {
            (Layer::Conv { inputs, outputs, kernel, weight, bias }, Cache::Input(x)) => {
                let [_, h, w] = x.shape;
                let kk = kernel * kernel;
                let mut gx = Tensor::zeros(x.n, x.shape);
                let mut gw = vec![0.0; weight.len()];
                let mut gb = vec![0.0; bias.len()];
                for s in 0..x.n {
                    let xin = x.sample(s);
                    let g = gy.sample(s);
                    let gxs = &mut gx.data[s * inputs * h * w..(s + 1) * inputs * h * w];
                    for o in 0..*outputs {
                        let gplane = &g[o * h * w..(o + 1) * h * w];
                        if !gb.is_empty() {
                            gb[o] += gplane.iter().sum::<f64>();
                        }
                        for i in 0..*inputs {
                            let src = &xin[i * h * w..(i + 1) * h * w];
                            let at = (o * inputs + i) * kk;
                            shifted_grad_w(&mut gw[at..at + kk], gplane, src, *kernel, h, w);
                            shifted_grad_x(&mut gxs[i * h * w..(i + 1) * h * w], gplane, &weight[at..at + kk], *kernel, h, w);
                        }
                    }
                }
                (gx, vec![gw, gb])
            }
            (Layer::BatchNorm { gamma, .. }, Cache::Norm { xhat, inv_std, .. }) => {
                let [c, h, w] = gy.shape;
                let hw = h * w;
                let m = (gy.n * hw) as f64;
                let mut ggamma = vec![0.0; c];
                let mut gbeta = vec![0.0; c];
                for s in 0..gy.n {
                    for ch in 0..c {
                        let base = s * c * hw + ch * hw;
                        for k in base..base + hw {
                            ggamma[ch] += gy.data[k] * xhat[k];
                            gbeta[ch] += gy.data[k];
                        }
                    }
                }
                let mut gx = Tensor::zeros(gy.n, gy.shape);
                for s in 0..gy.n {
                    for ch in 0..c {
                        let base = s * c * hw + ch * hw;
                        // dxhat = gy * gamma, summed terms reuse ggamma and gbeta.
                        let (sum_d, sum_dx) = (gamma[ch] * gbeta[ch], gamma[ch] * ggamma[ch]);
                        for k in base..base + hw {
                            let d = gy.data[k] * gamma[ch];
                            gx.data[k] = inv_std[ch] / m * (m * d - sum_d - xhat[k] * sum_dx);
                        }
                    }
                }
                (gx, vec![ggamma, gbeta])
            }
            (Layer::Relu, Cache::Mask(mask)) => {
                let data = gy.data.iter().zip(mask).map(|(&g, &on)| if on { g } else { 0.0 }).collect();
                (Tensor::new(gy.n, gy.shape, data), vec![])
            }
            (Layer::MaxPool { .. }, Cache::Argmax { input_shape, index }) => {
                let mut gx = Tensor::zeros(gy.n, *input_shape);
                for (&j, &g) in index.iter().zip(&gy.data) {
                    gx.data[j] += g;
                }
                (gx, vec![])
            }
            (Layer::Dense { inputs, outputs, weight, .. }, Cache::Input(x)) => {
                let mut gx = Tensor::zeros(x.n, x.shape);
                let mut gw = vec![0.0; weight.len()];
                let mut gb = vec![0.0; *outputs];
                for s in 0..x.n {
                    let xin = x.sample(s);
                    let gxs = &mut gx.data[s * inputs..(s + 1) * inputs];
                    for o in 0..*outputs {
                        let g = gy.data[s * outputs + o];
                        if g == 0.0 {
                            continue;
                        }
                        gb[o] += g;
                        axpy(&mut gw[o * inputs..(o + 1) * inputs], g, xin);
                        axpy(gxs, g, &weight[o * inputs..(o + 1) * inputs]);
                    }
                }
                (gx, vec![gw, gb])
            }
            (layer, _) => panic!("cache does not belong to a {} layer", layer.name()),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (u, v) in y.iter_mut().zip(x) {
        *u += a * v;
    }
}

/// For kernel offset `(ky, kx)`, the output rows and columns that read a
/// valid input pixel, and the input offset.
#[inline]
fn span(k: usize, pad: usize, n: usize) -> (usize, usize) {
    (pad.saturating_sub(k), (n + pad).saturating_sub(k).min(n))
}

fn shifted_acc(out: &mut [f64], src: &[f64], kw: &[f64], kernel: usize, h: usize, w: usize) {
    let pad = kernel / 2;
    for ky in 0..kernel {
        let (y0, y1) = span(ky, pad, h);
        for kx in 0..kernel {
            let wv = kw[ky * kernel + kx];
            let (x0, x1) = span(kx, pad, w);
            if x0 >= x1 {
                continue;
            }
            for y in y0..y1 {
                let iy = y + ky - pad;
                let o = &mut out[y * w + x0..y * w + x1];
                let s = &src[iy * w + x0 + kx - pad..iy * w + x1 + kx - pad];
                axpy(o, wv, s);
            }
        }
    }
}

fn shifted_grad_w(gw: &mut [f64], g: &[f64], src: &[f64], kernel: usize, h: usize, w: usize) {
    let pad = kernel / 2;
    for ky in 0..kernel {
        let (y0, y1) = span(ky, pad, h);
        for kx in 0..kernel {
            let (x0, x1) = span(kx, pad, w);
            if x0 >= x1 {
                continue;
            }
            let mut acc = 0.0;
            for y in y0..y1 {
                let iy = y + ky - pad;
                acc += dot(&g[y * w + x0..y * w + x1], &src[iy * w + x0 + kx - pad..iy * w + x1 + kx - pad]);
            }
            gw[ky * kernel + kx] += acc;
        }
    }
}

fn shifted_grad_x(gx: &mut [f64], g: &[f64], kw: &[f64], kernel: usize, h: usize, w: usize) {
    let pad = kernel / 2;
    for ky in 0..kernel {
        let (y0, y1) = span(ky, pad, h);
        for kx in 0..kernel {
            let wv = kw[ky * kernel + kx];
            let (x0, x1) = span(kx, pad, w);
            if x0 >= x1 {
                continue;
            }
            for y in y0..y1 {
                let iy = y + ky - pad;
                axpy(&mut gx[iy * w + x0 + kx - pad..iy * w + x1 + kx - pad], wv, &g[y * w + x0..y * w + x1]);
            }
        }
    }
}

/// Mean cross-entropy of the softmax of `logits` against class indices,
/// and its gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> (f64, Tensor) {
    let r = logits.sample_len();
    let n = logits.n as f64;
    let mut grad = Tensor::zeros(logits.n, logits.shape);
    let mut loss = 0.0;
    for (s, &t) in targets.iter().enumerate() {
        let p = softmax(logits.sample(s));
        loss -= p[t].max(f64::MIN_POSITIVE).ln();
        for k in 0..r {
            grad.data[s * r + k] = (p[k] - if k == t { 1.0 } else { 0.0 }) / n;
        }
    }
    (loss / n, grad)
}

/// Mean squared error over every sample and output, and its gradient.
pub fn mse(pred: &Tensor, targets: &[[f64; 2]]) -> (f64, Tensor) {
    let d = pred.sample_len();
    assert_eq!(d, 2, "regression head has two outputs");
    let count = (pred.n * d) as f64;
    let mut grad = Tensor::zeros(pred.n, pred.shape);
    let mut loss = 0.0;
    for (s, t) in targets.iter().enumerate() {
        for k in 0..d {
            let e = pred.data[s * d + k] - t[k];
            loss += e * e;
            grad.data[s * d + k] = 2.0 * e / count;
        }
    }
    (loss / count, grad)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_conv_scales() {
        let conv = Layer::Conv { inputs: 1, outputs: 1, kernel: 1, weight: vec![2.0], bias: vec![0.0] };
        let x = Tensor::new(1, [1, 2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 7.0]);
        let (y, _) = conv.forward(&x, false);
        let (z, _) = Layer::MaxPool { size: 1 }.forward(&y, false);
        assert_eq!(z.data, x.data.iter().map(|v| 2.0 * v).collect::<Vec<_>>());
    }

    #[test]
    fn conv_matches_naive() {
        let (c, o, k, h, w) = (2, 3, 3, 4, 5);
        let weight: Vec<f64> = (0..o * c * k * k).map(|i| ((i * 7 % 11) as f64 - 5.0) / 7.0).collect();
        let bias = vec![0.1, -0.2, 0.3];
        let x = Tensor::new(1, [c, h, w], (0..c * h * w).map(|i| ((i * 5 % 13) as f64 - 6.0) / 5.0).collect());
        let conv = Layer::Conv { inputs: c, outputs: o, kernel: k, weight: weight.clone(), bias: bias.clone() };
        let (y, _) = conv.forward(&x, false);
        for oc in 0..o {
            for yy in 0..h {
                for xx in 0..w {
                    let mut v = bias[oc];
                    for ic in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let (iy, ix) = (yy as i64 + ky as i64 - 1, xx as i64 + kx as i64 - 1);
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    v += weight[((oc * c + ic) * k + ky) * k + kx]
                                        * x.data[ic * h * w + iy as usize * w + ix as usize];
                                }
                            }
                        }
                    }
                    assert!((y.data[oc * h * w + yy * w + xx] - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn losses() {
        let uniform = Tensor::new(1, [10, 1, 1], vec![0.3; 10]);
        let (l, _) = softmax_cross_entropy(&uniform, &[4]);
        assert!((l - 10f64.ln()).abs() < 1e-12);
        let sure = Tensor::new(1, [3, 1, 1], vec![0.0, 800.0, 0.0]);
        assert!(softmax_cross_entropy(&sure, &[1]).0.abs() < 1e-12);
        let p = Tensor::new(2, [2, 1, 1], vec![1.0, 2.0, 3.0, 4.0]);
        let (l, g) = mse(&p, &[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(l, 0.0);
        assert!(g.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_input_dense_grads() {
        let dense = Layer::Dense { inputs: 3, outputs: 2, weight: vec![0.0; 6], bias: vec![0.0; 2] };
        let x = Tensor::zeros(1, [3, 1, 1]);
        let (_, cache) = dense.forward(&x, true);
        let gy = Tensor::new(1, [2, 1, 1], vec![0.5, -1.0]);
        let (_, g) = dense.backward(&cache, &gy);
        assert!(g[0].iter().all(|&v| v == 0.0));
        assert_eq!(g[1], vec![0.5, -1.0]);
    }
}
