//! Convolutional feature extractor followed by one-vs-rest linear SVMs.
//!
//! The extractor is the OLCE encoder trained on cross-entropy alone
//! (`lambda_recon = 0`); its pooled `12 x T/4` activations feed the SVMs.

use serde::{Deserialize, Serialize};

use super::svm::{OvrSvm, SvmConfig};
use super::Classifier;
use crate::error::{Error, Result};
use crate::nn::Tensor3;
use crate::olce::{self, OlceParams, TrainConfig};
use crate::signalio::{ResponseSample, SplitView};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnSvmConfig {
    pub encoder: TrainConfig,
    pub svm: SvmConfig,
}

impl Default for CnnSvmConfig {
    fn default() -> Self {
        Self {
            encoder: TrainConfig {
                epochs: 100,
                lambda_recon: 0.0,
                ..TrainConfig::default()
            },
            svm: SvmConfig::default(),
        }
    }
}

impl CnnSvmConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.encoder.seed = seed;
        self.svm.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct CnnSvm {
    pub config: CnnSvmConfig,
    pub encoder: Option<OlceParams>,
    pub svm: Option<OvrSvm>,
}

impl CnnSvm {
    pub fn new(config: CnnSvmConfig) -> Self {
        Self {
            config,
            encoder: None,
            svm: None,
        }
    }

    pub fn features(&self, sample: &ResponseSample) -> Result<Vec<f64>> {
        let enc = self.encoder.as_ref().ok_or_else(|| Error::Fit("CNN-SVM is not fitted".into()))?;
        enc.features(&Tensor3::from_sample(sample))
    }
}

impl Classifier for CnnSvm {
    fn name(&self) -> &'static str {
        "cnn_svm"
    }

    fn fit(&mut self, data: &dyn SplitView) -> Result<()> {
        let cfg = TrainConfig {
            lambda_recon: 0.0,
            ..self.config.encoder.clone()
        };
        let (encoder, _) = olce::train(data, &cfg)?;
        self.encoder = Some(encoder);
        let idx = data.train_indices()?;
        let x: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| self.features(data.sample(i)))
            .collect::<Result<_>>()?;
        let y: Vec<usize> = idx.iter().map(|&i| data.sample(i).label).collect();
        self.svm = Some(OvrSvm::fit(&x, &y, data.num_classes(), &self.config.svm)?);
        Ok(())
    }

    fn predict(&self, sample: &ResponseSample) -> Result<usize> {
        let svm = self.svm.as_ref().ok_or_else(|| Error::Fit("CNN-SVM is not fitted".into()))?;
        Ok(svm.predict(&self.features(sample)?))
    }

    fn dump(&self) -> Result<serde_json::Value> {
        let encoder = self.encoder.as_ref().map(OlceParams::to_checkpoint);
        Ok(serde_json::json!({ "config": self.config, "encoder": encoder, "svm": self.svm }))
    }
}
