//! Plain fully-connected network: ReLU hidden layers, softmax output.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gradcheck::GradCheckable;
use super::layers::{fully_connected, fully_connected_backward_into, relu_backward, relu_in_place, softmax, LayerParams};
use super::loss::{cross_entropy_grad, CE_EPSILON};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<LayerParams>,
}

/// Pre-activations of every layer and the final softmax output.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub pre: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl DenseNet {
    /// `widths` lists every layer width including input and output,
    /// e.g. `[1200, 256, 128, 64, 32, 7]`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!("invalid layer widths {widths:?}")));
        }
        let layers = widths
            .windows(2)
            .map(|w| LayerParams::fully_connected(w[1], w[0]).init_uniform(rng))
            .collect();
        Ok(Self { layers })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].shape[1]
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map(|l| l.shape[0]).unwrap_or(0)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(LayerParams::num_params).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<DenseCache> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = fully_connected(&act, layer)?;
            act = z.clone();
            if l + 1 < self.layers.len() {
                relu_in_place(&mut act);
            }
            pre.push(z);
        }
        let probs = softmax(&act).as_slice().to_vec();
        Ok(DenseCache { pre, probs })
    }

    pub fn predict_probs(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.probs)
    }

    /// Backpropagates a cross-entropy loss against `target`, adding parameter
    /// gradients into `grads` and returning the input gradient.
    pub fn backward_into(&self, x: &[f64], cache: &DenseCache, target: &[f64], grads: &mut [LayerParams]) -> Result<Vec<f64>> {
        let gp = cross_entropy_grad(&cache.probs, target);
        let mut g = super::layers::softmax_backward(&cache.probs, &gp);
        for l in (0..self.layers.len()).rev() {
            if l + 1 < self.layers.len() {
                relu_backward(&cache.pre[l], &mut g);
            }
            let input: Vec<f64>;
            let input_ref: &[f64] = if l == 0 {
                x
            } else {
                input = cache.pre[l - 1].iter().map(|v| v.max(0.0)).collect();
                &input
            };
            g = fully_connected_backward_into(input_ref, &self.layers[l], &g, &mut grads[l])?;
        }
        Ok(g)
    }

    pub fn zero_grads(&self) -> Vec<LayerParams> {
        self.layers.iter().map(LayerParams::zeros_like).collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

pub(crate) fn grad_slices(grads: &[LayerParams]) -> Vec<&[f64]> {
    grads.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()]).collect()
}

pub(crate) fn ce_of(probs: &[f64], target: &[f64]) -> f64 {
    -probs.iter().zip(target).map(|(p, t)| t * (p + CE_EPSILON).ln()).sum::<f64>()
}

/// A [`DenseNet`] pinned to one input and target, exposing its cross-entropy
/// loss to [`super::gradcheck::grad_check`]. Coordinates are every weight and
/// bias (layer by layer) followed by the input elements.
#[derive(Debug, Clone)]
pub struct DenseProbe {
    pub net: DenseNet,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    offsets: Vec<usize>,
    cache: DenseCache,
}

impl DenseProbe {
    pub fn new(net: DenseNet, input: Vec<f64>, target: Vec<f64>) -> Self {
        let mut offsets = vec![0];
        for l in &net.layers {
            let last = *offsets.last().unwrap();
            offsets.push(last + l.num_params());
        }
        let cache = net.forward(&input).expect("probe input must match the network");
        Self {
            net,
            input,
            target,
            offsets,
            cache,
        }
    }

    fn locate(&self, index: usize) -> Option<(usize, usize)> {
        let l = self.offsets.windows(2).position(|w| index < w[1])?;
        Some((l, index - self.offsets[l]))
    }

    fn activation(&self, pre: &[f64], l: usize) -> Vec<f64> {
        if l + 1 < self.net.layers.len() {
            pre.iter().map(|v| v.max(0.0)).collect()
        } else {
            pre.to_vec()
        }
    }

    /// Loss after pre-activation `unit` of layer `l` moves by `change`.
    fn patched_loss(&self, l: usize, unit: usize, change: f64) -> f64 {
        let pre = &self.cache.pre[l];
        if l + 1 == self.net.layers.len() {
            let mut z = pre.clone();
            z[unit] += change;
            return self.finish(z, l);
        }
        let da = (pre[unit] + change).max(0.0) - pre[unit].max(0.0);
        let next = &self.net.layers[l + 1];
        let nin = next.shape[1];
        let mut z = self.cache.pre[l + 1].clone();
        if da != 0.0 {
            for (o, zo) in z.iter_mut().enumerate() {
                *zo += next.weights[o * nin + unit] * da;
            }
        }
        self.finish(z, l + 1)
    }

    /// Finishes a forward pass from layer `from` onwards given that layer's
    /// pre-activation.
    fn finish(&self, mut z: Vec<f64>, from: usize) -> f64 {
        for l in from..self.net.layers.len() {
            if l > from {
                let act = self.activation(&z, l - 1);
                z = fully_connected(&act, &self.net.layers[l]).expect("probe shapes are fixed");
            }
        }
        let probs = softmax(&z);
        ce_of(probs.as_slice(), &self.target)
    }
}

impl GradCheckable for DenseProbe {
    fn num_coordinates(&self) -> usize {
        self.offsets.last().unwrap() + self.input.len()
    }

    fn get(&self, index: usize) -> f64 {
        match self.locate(index) {
            Some((l, off)) => {
                let layer = &self.net.layers[l];
                if off < layer.weights.len() {
                    layer.weights[off]
                } else {
                    layer.bias[off - layer.weights.len()]
                }
            }
            None => self.input[index - self.offsets.last().unwrap()],
        }
    }

    fn set(&mut self, index: usize, value: f64) {
        match self.locate(index) {
            Some((l, off)) => {
                let layer = &mut self.net.layers[l];
                if off < layer.weights.len() {
                    layer.weights[off] = value;
                } else {
                    let nw = layer.weights.len();
                    layer.bias[off - nw] = value;
                }
            }
            None => {
                let base = *self.offsets.last().unwrap();
                self.input[index - base] = value;
            }
        }
        self.cache = self.net.forward(&self.input).expect("probe shapes are fixed");
    }

    fn loss(&self) -> f64 {
        ce_of(&self.cache.probs, &self.target)
    }

    fn gradient(&self) -> Vec<f64> {
        let mut grads = self.net.zero_grads();
        let gx = self
            .net
            .backward_into(&self.input, &self.cache, &self.target, &mut grads)
            .expect("probe shapes are fixed");
        let mut out = Vec::with_capacity(self.num_coordinates());
        for g in &grads {
            out.extend_from_slice(&g.weights);
            out.extend_from_slice(&g.bias);
        }
        out.extend_from_slice(&gx);
        out
    }

    fn groups(&self) -> Vec<(String, Range<usize>)> {
        let mut groups: Vec<(String, Range<usize>)> = self
            .offsets
            .windows(2)
            .enumerate()
            .map(|(l, w)| (format!("fc{}", l + 1), w[0]..w[1]))
            .collect();
        let base = *self.offsets.last().unwrap();
        groups.push(("input".into(), base..base + self.input.len()));
        groups
    }

    /// Incremental evaluation: one weight, bias or input element moves a
    /// single pre-activation (or, for inputs, one column of the first layer),
    /// so earlier layers are reused and the following layer is patched by one
    /// column before the remaining layers run.
    fn shifted_loss(&mut self, index: usize, delta: f64) -> f64 {
        match self.locate(index) {
            Some((l, off)) => {
                let layer = &self.net.layers[l];
                let nin = layer.shape[1];
                if off < layer.weights.len() {
                    let (o, i) = (off / nin, off % nin);
                    let input_i = if l == 0 {
                        self.input[i]
                    } else {
                        self.cache.pre[l - 1][i].max(0.0)
                    };
                    self.patched_loss(l, o, delta * input_i)
                } else {
                    self.patched_loss(l, off - layer.weights.len(), delta)
                }
            }
            None => {
                let i = index - self.offsets.last().unwrap();
                let layer = &self.net.layers[0];
                let nin = layer.shape[1];
                let mut z = self.cache.pre[0].clone();
                for (o, zo) in z.iter_mut().enumerate() {
                    *zo += layer.weights[o * nin + i] * delta;
                }
                self.finish(z, 0)
            }
        }
    }

    fn near_kink(&self, margin: f64) -> bool {
        let hidden = self.cache.pre.len().saturating_sub(1);
        self.cache.pre[..hidden].iter().flatten().any(|z| z.abs() < margin)
    }
}
