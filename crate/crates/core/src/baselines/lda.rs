//! Linear discriminant analysis with a shared, ridge-regularized covariance.
//!
//! The pooled within-class covariance `S = (1/n) sum_k sum_{i in k} (x_i - mu_k)(x_i - mu_k)^T`
//! is singular whenever the feature count exceeds the training count, so the
//! model solves against `S + eps I` with `eps = 1e-6 * trace(S) / d`. The
//! discriminant of class `k` is
//! `delta_k(x) = x . a_k - 0.5 mu_k . a_k + ln pi_k` with `a_k = (S + eps I)^-1 mu_k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{flatten, train_features, Classifier};
use crate::error::{Error, Result};
use crate::signalio::{argmax, ResponseSample, SplitView};

/// Relative ridge added to the pooled covariance.
pub const RIDGE_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub coef: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
}

impl LdaModel {
    /// Fits on row feature vectors `x` with labels `y` in `[0, num_classes)`.
    pub fn fit(x: &[Vec<f64>], y: &[usize], num_classes: usize) -> Result<Self> {
        let n = x.len();
        if n == 0 || n != y.len() {
            return Err(Error::Fit("LDA needs a non-empty, labelled training set".into()));
        }
        let d = x[0].len();
        let mut counts = vec![0usize; num_classes];
        let mut means = vec![vec![0.0; d]; num_classes];
        for (row, &label) in x.iter().zip(y) {
            if row.len() != d {
                return Err(Error::dim("LDA: ragged feature rows"));
            }
            counts[label] += 1;
            for (m, v) in means[label].iter_mut().zip(row) {
                *m += v;
            }
        }
        if counts.iter().filter(|&&c| c > 0).count() < 2 {
            return Err(Error::Fit("LDA needs at least two classes in the training set".into()));
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            if c > 0 {
                m.iter_mut().for_each(|v| *v /= c as f64);
            }
        }

        let centered = DMatrix::from_fn(n, d, |i, j| x[i][j] - means[y[i]][j]);
        let mut cov = centered.tr_mul(&centered);
        cov /= n as f64;
        let ridge = RIDGE_FACTOR * cov.trace() / d as f64;
        let ridge = if ridge > 0.0 { ridge } else { RIDGE_FACTOR };
        for i in 0..d {
            cov[(i, i)] += ridge;
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Fit("regularized covariance is not positive definite".into()))?;

        let mut coef = vec![vec![0.0; d]; num_classes];
        let mut intercept = vec![f64::NEG_INFINITY; num_classes];
        for k in 0..num_classes {
            if counts[k] == 0 {
                continue;
            }
            let mu = DVector::from_column_slice(&means[k]);
            let a = chol.solve(&mu);
            intercept[k] = -0.5 * mu.dot(&a) + (counts[k] as f64 / n as f64).ln();
            coef[k] = a.as_slice().to_vec();
        }
        Ok(Self { coef, intercept })
    }

    pub fn decision(&self, x: &[f64]) -> Vec<f64> {
        self.coef
            .iter()
            .zip(&self.intercept)
            .map(|(a, b)| b + a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.decision(x))
    }
}

/// LDA on flattened `C x T` samples.
#[derive(Debug, Clone, Default)]
pub struct Lda {
    pub model: Option<LdaModel>,
}

impl Classifier for Lda {
    fn name(&self) -> &'static str {
        "lda"
    }

    fn fit(&mut self, data: &dyn SplitView) -> Result<()> {
        let (x, y) = train_features(data)?;
        self.model = Some(LdaModel::fit(&x, &y, data.num_classes())?);
        Ok(())
    }

    fn predict(&self, sample: &ResponseSample) -> Result<usize> {
        let model = self.model.as_ref().ok_or_else(|| Error::Fit("LDA is not fitted".into()))?;
        Ok(model.predict(&flatten(sample)))
    }

    fn dump(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(&self.model).expect("LDA model serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clouds(rng: &mut ChaCha8Rng, n: usize, d: usize, k: usize, spread: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % k;
            x.push(centers[c].iter().map(|m| m + spread * rng.gen_range(-1.0..1.0)).collect());
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn separable_two_d() {
        let x = vec![vec![0.0, 0.0], vec![0.2, 0.1], vec![-0.1, 0.2], vec![5.0, 5.0], vec![5.1, 4.8], vec![4.9, 5.2]];
        let y = vec![0, 0, 0, 1, 1, 1];
        let m = LdaModel::fit(&x, &y, 2).unwrap();
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(m.predict(row), label);
        }
    }

    #[test]
    fn single_class_is_error() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(LdaModel::fit(&x, &[0, 0], 2), Err(Error::Fit(_))));
    }

    #[test]
    fn duplicating_samples_keeps_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let (x, y) = clouds(&mut rng, 30, 4, 3, 2.5);
            let m1 = LdaModel::fit(&x, &y, 3).unwrap();
            let x2: Vec<_> = x.iter().chain(&x).cloned().collect();
            let y2: Vec<_> = y.iter().chain(&y).cloned().collect();
            let m2 = LdaModel::fit(&x2, &y2, 3).unwrap();
            let (probe, _) = clouds(&mut rng, 50, 4, 3, 4.0);
            for p in &probe {
                assert_eq!(m1.predict(p), m2.predict(p));
            }
        }
    }

    #[test]
    fn affine_rescaling_keeps_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (x, y) = clouds(&mut rng, 40, 5, 4, 2.0);
        let (probe, _) = clouds(&mut rng, 60, 5, 4, 3.0);
        let (a, b) = (3.5, -1.25);
        let t = |v: &Vec<f64>| v.iter().map(|u| a * u + b).collect::<Vec<f64>>();
        let m1 = LdaModel::fit(&x, &y, 4).unwrap();
        let m2 = LdaModel::fit(&x.iter().map(t).collect::<Vec<_>>(), &y, 4).unwrap();
        for p in &probe {
            assert_eq!(m1.predict(p), m2.predict(&t(p)));
        }
    }

    #[test]
    fn handles_more_features_than_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, y) = clouds(&mut rng, 12, 40, 3, 0.5);
        let m = LdaModel::fit(&x, &y, 3).unwrap();
        let acc = x.iter().zip(&y).filter(|(r, &l)| m.predict(r) == l).count();
        assert_eq!(acc, 12);
    }
}
