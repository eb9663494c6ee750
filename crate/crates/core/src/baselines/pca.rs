//! Principal component analysis by SVD, and LDA on whitened components.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lda::LdaModel;
use super::{flatten, train_features, Classifier};
use crate::error::{Error, Result};
use crate::signalio::{ResponseSample, SplitView};

pub const DEFAULT_COMPONENTS: usize = 49;

/// Singular values below `RANK_TOLERANCE * s_max` count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit-norm principal directions, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// Standard deviation of the training data along each component.
    pub scales: Vec<f64>,
}

impl Pca {
    pub fn fit(x: &[Vec<f64>], num_components: usize) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::Fit("PCA needs a non-empty training set".into()));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(Error::dim("PCA: ragged feature rows"));
        }
        let mut mean = vec![0.0; d];
        for r in x {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = DMatrix::from_fn(n, d, |i, j| x[i][j] - mean[j]);
        let svd = centered.svd(false, true);
        let v_t = svd.v_t.ok_or_else(|| Error::Numeric("SVD did not produce right singular vectors".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let s_max = order.first().map_or(0.0, |&i| svd.singular_values[i]);
        let rank = order
            .iter()
            .filter(|&&i| svd.singular_values[i] > RANK_TOLERANCE * s_max && s_max > 0.0)
            .count();
        if rank < num_components {
            return Err(Error::Fit(format!(
                "PCA: requested {num_components} components but the training data has rank {rank}"
            )));
        }
        let sqrt_n = (n as f64).sqrt();
        let mut components = Vec::with_capacity(num_components);
        let mut scales = Vec::with_capacity(num_components);
        for &i in order.iter().take(num_components) {
            components.push(v_t.row(i).iter().copied().collect());
            scales.push(svd.singular_values[i] / sqrt_n);
        }
        Ok(Self { mean, components, scales })
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// Coordinates along the first `k` components, unscaled.
    pub fn project(&self, x: &[f64], k: usize) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        self.components[..k]
            .iter()
            .map(|c| c.iter().zip(&centered).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Whitened coordinates: each component divided by its training scale.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        self.project(x, self.num_components())
            .iter()
            .zip(&self.scales)
            .map(|(p, s)| p / s)
            .collect()
    }

    /// Inverse of [`Pca::transform`] within the retained subspace.
    pub fn inverse_transform(&self, z: &[f64]) -> Vec<f64> {
        let coords: Vec<f64> = z.iter().zip(&self.scales).map(|(v, s)| v * s).collect();
        self.back_project(&coords)
    }

    /// Projects onto the first `k` components and maps back to input space.
    pub fn reconstruct(&self, x: &[f64], k: usize) -> Vec<f64> {
        let coords = self.project(x, k);
        self.back_project(&coords)
    }

    fn back_project(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, a) in self.components.iter().zip(coords) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += a * v;
            }
        }
        out
    }
}

/// PCA to `components` whitened dimensions followed by LDA.
#[derive(Debug, Clone)]
pub struct PcaLda {
    pub components: usize,
    pub pca: Option<Pca>,
    pub lda: Option<LdaModel>,
}

impl Default for PcaLda {
    fn default() -> Self {
        Self::new(DEFAULT_COMPONENTS)
    }
}

impl PcaLda {
    pub fn new(components: usize) -> Self {
        Self {
            components,
            pca: None,
            lda: None,
        }
    }
}

impl Classifier for PcaLda {
    fn name(&self) -> &'static str {
        "pca_lda"
    }

    fn fit(&mut self, data: &dyn SplitView) -> Result<()> {
        let (x, y) = train_features(data)?;
        if x.len() <= self.components {
            return Err(Error::Fit(format!(
                "PCA-LDA needs more than {} training samples, got {}",
                self.components,
                x.len()
            )));
        }
        let pca = Pca::fit(&x, self.components)?;
        let z: Vec<Vec<f64>> = x.iter().map(|r| pca.transform(r)).collect();
        self.lda = Some(LdaModel::fit(&z, &y, data.num_classes())?);
        self.pca = Some(pca);
        Ok(())
    }

    fn predict(&self, sample: &ResponseSample) -> Result<usize> {
        match (&self.pca, &self.lda) {
            (Some(pca), Some(lda)) => Ok(lda.predict(&pca.transform(&flatten(sample)))),
            _ => Err(Error::Fit("PCA-LDA is not fitted".into())),
        }
    }

    fn dump(&self) -> Result<serde_json::Value> {
        Ok(serde_json::json!({ "components": self.components, "pca": self.pca, "lda": self.lda }))
    }
}
