//! Multilayer perceptron on flattened samples.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{flatten, train_features, Classifier};
use crate::error::{Error, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::dense::{ce_of, grad_slices, DenseNet};
use crate::nn::Optimizer;
use crate::signalio::{argmax, LabelVector, ResponseSample, SplitView};

pub const HIDDEN_WIDTHS: [usize; 4] = [256, 128, 64, 32];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: HIDDEN_WIDTHS.to_vec(),
            epochs: 30,
            batch_size: 16,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Mlp {
    pub config: MlpConfig,
    pub net: Option<DenseNet>,
    /// Mean training cross-entropy per epoch.
    pub losses: Vec<f64>,
}

impl Mlp {
    pub fn new(config: MlpConfig) -> Self {
        Self {
            config,
            net: None,
            losses: Vec::new(),
        }
    }

    pub fn fit_features(&mut self, x: &[Vec<f64>], y: &[usize], num_classes: usize) -> Result<()> {
        let cfg = &self.config;
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Fit("MLP needs a non-empty, labelled training set".into()));
        }
        if cfg.epochs == 0 || cfg.batch_size == 0 {
            return Err(Error::Config("MLP epochs and batch_size must be at least 1".into()));
        }
        let mut widths = vec![x[0].len()];
        widths.extend(&cfg.hidden);
        widths.push(num_classes);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut net = DenseNet::new(&widths, &mut rng)?;
        let targets: Vec<Vec<f64>> = y
            .iter()
            .map(|&l| Ok(LabelVector::one_hot(l, num_classes)?.as_slice().to_vec()))
            .collect::<Result<_>>()?;
        let mut optimizer = Optimizer::adam(cfg.lr);
        let mut order: Vec<usize> = (0..x.len()).collect();
        self.losses.clear();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut loss = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let mut grads = net.zero_grads();
                for &i in batch {
                    let cache = net.forward(&x[i])?;
                    loss += ce_of(&cache.probs, &targets[i]);
                    net.backward_into(&x[i], &cache, &targets[i], &mut grads)?;
                }
                let inv = 1.0 / batch.len() as f64;
                grads.iter_mut().for_each(|g| g.scale(inv));
                optimizer.step(net.param_slices_mut(), grad_slices(&grads))?;
            }
            let mean = loss / x.len() as f64;
            if !mean.is_finite() {
                return Err(Error::Numeric(format!("non-finite MLP loss at epoch {}", epoch + 1)));
            }
            self.losses.push(mean);
        }
        self.net = Some(net);
        Ok(())
    }

    pub fn predict_features(&self, x: &[f64]) -> Result<usize> {
        let net = self.net.as_ref().ok_or_else(|| Error::Fit("MLP is not fitted".into()))?;
        Ok(argmax(&net.predict_probs(x)?))
    }
}

impl Classifier for Mlp {
    fn name(&self) -> &'static str {
        "mlp"
    }

    fn fit(&mut self, data: &dyn SplitView) -> Result<()> {
        let (x, y) = train_features(data)?;
        self.fit_features(&x, &y, data.num_classes())
    }

    fn predict(&self, sample: &ResponseSample) -> Result<usize> {
        self.predict_features(&flatten(sample))
    }

    fn dump(&self) -> Result<serde_json::Value> {
        let net = self.net.as_ref().ok_or_else(|| Error::Fit("MLP is not fitted".into()))?;
        let ck = Checkpoint::new("mlp", net.layers.clone());
        Ok(serde_json::json!({ "config": self.config, "checkpoint": ck }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<usize>) {
        let x: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let c = (i % 3) as f64;
                vec![c + 0.1 * (i as f64).sin(), -c, 0.5 * c]
            })
            .collect();
        let y = (0..60).map(|i| i % 3).collect();
        (x, y)
    }

    #[test]
    fn learns_toy_and_is_deterministic() {
        let (x, y) = toy();
        let cfg = MlpConfig {
            hidden: vec![8, 8],
            epochs: 60,
            lr: 1e-2,
            ..MlpConfig::default()
        };
        let mut a = Mlp::new(cfg.clone());
        a.fit_features(&x, &y, 3).unwrap();
        let mut b = Mlp::new(cfg);
        b.fit_features(&x, &y, 3).unwrap();
        assert_eq!(a.net, b.net);
        assert!(a.losses.last().unwrap() < a.losses.first().unwrap());
        let correct = x.iter().zip(&y).filter(|(r, &l)| a.predict_features(r).unwrap() == l).count();
        assert_eq!(correct, 60);
    }

    #[test]
    fn output_width_is_class_count() {
        let (x, y) = toy();
        let mut m = Mlp::new(MlpConfig {
            epochs: 1,
            ..MlpConfig::default()
        });
        m.fit_features(&x, &y, 7).unwrap();
        assert_eq!(m.net.as_ref().unwrap().output_width(), 7);
        assert_eq!(m.net.as_ref().unwrap().layers.len(), 5);
    }
}
