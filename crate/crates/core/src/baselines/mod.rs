//! Comparison classifiers behind one fit/predict interface.

pub mod cnn_svm;
pub mod lda;
pub mod mlp;
pub mod pca;
pub mod svm;
pub mod tree;

pub use cnn_svm::{CnnSvm, CnnSvmConfig};
pub use lda::{Lda, LdaModel};
pub use mlp::{Mlp, MlpConfig};
pub use pca::{Pca, PcaLda};
pub use svm::{LinearSvm, OvrSvm, SvmConfig};
pub use tree::{gini, DecisionTree, TreeConfig, TreeNode};

use crate::error::Result;
use crate::signalio::{ResponseSample, SplitView};

/// A multi-class classifier that learns from the training split only.
pub trait Classifier {
    fn name(&self) -> &'static str;

    /// Fits on `data.train_indices()`; never reads other samples.
    fn fit(&mut self, data: &dyn SplitView) -> Result<()>;

    /// Predicted class index in `[0, K)`.
    fn predict(&self, sample: &ResponseSample) -> Result<usize>;

    /// Versioned JSON description of the fitted model.
    fn dump(&self) -> Result<serde_json::Value>;
}

/// Channel-major `C * T` feature vector of a sample.
pub fn flatten(sample: &ResponseSample) -> Vec<f64> {
    sample.data().to_vec()
}

/// Flattened training features and labels.
pub(crate) fn train_features(data: &dyn SplitView) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let idx = data.train_indices()?;
    let x = idx.iter().map(|&i| flatten(data.sample(i))).collect();
    let y = idx.iter().map(|&i| data.sample(i).label).collect();
    Ok((x, y))
}
