use super::tensor::Tensor3;
use crate::error::{Error, Result};
use crate::signalio::LabelVector;

/// Guard inside the logarithm of [`cross_entropy`].
pub const CE_EPSILON: f64 = 1e-12;

/// `-sum_k target_k * ln(pred_k + 1e-12)`.
pub fn cross_entropy(pred: &LabelVector, target: &LabelVector) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::dim(format!(
            "cross entropy: prediction has {} classes, target {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(-pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| t * (p + CE_EPSILON).ln())
        .sum::<f64>())
}

/// Gradient of [`cross_entropy`] with respect to `pred`.
pub fn cross_entropy_grad(pred: &[f64], target: &[f64]) -> Vec<f64> {
    pred.iter().zip(target).map(|(p, t)| -t / (p + CE_EPSILON)).collect()
}

/// Mean squared difference over all elements.
pub fn mse(a: &Tensor3, b: &Tensor3) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::dim(format!("mse: {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(mse_slices(a.data(), b.data()))
}

pub(crate) fn mse_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Gradient of [`mse`] with respect to `a`.
pub fn mse_grad(a: &[f64], b: &[f64]) -> Vec<f64> {
    let scale = 2.0 / a.len() as f64;
    a.iter().zip(b).map(|(x, y)| scale * (x - y)).collect()
}
