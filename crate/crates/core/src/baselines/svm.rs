//! Linear SVMs trained by stochastic subgradient descent on
//! `lambda/2 |w|^2 + mean_i max(0, 1 - y_i (w . x_i + b))`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signalio::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// L2 weight `lambda`.
    pub l2: f64,
    pub epochs: usize,
    /// Step size at epoch 0; epoch `e` uses `lr / sqrt(1 + e)`.
    pub lr: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            epochs: 200,
            lr: 0.01,
            seed: 0,
        }
    }
}

/// Binary linear SVM with labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    /// Mean hinge loss over `(x, y)`.
    pub fn hinge_loss(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .map(|(r, &t)| (1.0 - t * self.margin(r)).max(0.0))
            .sum::<f64>()
            / x.len() as f64
    }

    pub fn fit(x: &[Vec<f64>], y: &[f64], cfg: &SvmConfig) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Fit("SVM needs a non-empty, labelled training set".into()));
        }
        let d = x[0].len();
        let mut svm = Self {
            weights: vec![0.0; d],
            bias: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..x.len()).collect();
        for epoch in 0..cfg.epochs {
            let lr = cfg.lr / (1.0 + epoch as f64).sqrt();
            order.shuffle(&mut rng);
            for &i in &order {
                let violated = y[i] * svm.margin(&x[i]) < 1.0;
                let shrink = 1.0 - lr * cfg.l2;
                if violated {
                    for (w, v) in svm.weights.iter_mut().zip(&x[i]) {
                        *w = shrink * *w + lr * y[i] * v;
                    }
                    svm.bias += lr * y[i];
                } else {
                    svm.weights.iter_mut().for_each(|w| *w *= shrink);
                }
            }
            if !svm.bias.is_finite() {
                return Err(Error::Numeric("SVM weights diverged".into()));
            }
        }
        Ok(svm)
    }
}

/// One-vs-rest SVMs over z-scored features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrSvm {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub machines: Vec<LinearSvm>,
}

impl OvrSvm {
    pub fn fit(x: &[Vec<f64>], y: &[usize], num_classes: usize, cfg: &SvmConfig) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Fit("SVM needs a non-empty, labelled training set".into()));
        }
        let n = x.len() as f64;
        let d = x[0].len();
        let mut mean = vec![0.0; d];
        for r in x {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; d];
        for r in x {
            for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        // constant features map to zero
        scale.iter_mut().for_each(|s| *s = if *s > 0.0 { 1.0 / s.sqrt() } else { 0.0 });
        let mut model = Self {
            mean,
            scale,
            machines: Vec::with_capacity(num_classes),
        };
        let z: Vec<Vec<f64>> = x.iter().map(|r| model.standardize(r)).collect();
        for k in 0..num_classes {
            let t: Vec<f64> = y.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
            let cfg_k = SvmConfig {
                seed: cfg.seed.wrapping_add(k as u64),
                ..*cfg
            };
            model.machines.push(LinearSvm::fit(&z, &t, &cfg_k)?);
        }
        Ok(model)
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) * s)
            .collect()
    }

    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        let z = self.standardize(x);
        self.machines.iter().map(|m| m.margin(&z)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.margins(x))
    }
}
