//! Confusion matrices, single-run evaluation indexes and multi-run
//! aggregation.
//!
//! Precision, recall and F1 are macro averages. A class whose denominator is
//! zero contributes 0 and is noted in [`EvalReport::warnings`]. Aggregate
//! variance uses the `n - 1` denominator; a single run has variance 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

impl ConfusionMatrix {
    /// Validates a square count matrix with a positive total.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(Error::dim("confusion matrix must be square and non-empty"));
        }
        let n = counts.iter().flatten().sum();
        if n == 0 {
            return Err(Error::dim("confusion matrix has no samples"));
        }
        Ok(Self { counts, n })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    /// `a_i`: samples whose true class is `i`.
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// `b_i`: samples predicted as class `i`.
    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.num_classes()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion(true_labels: &[usize], predicted: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if true_labels.len() != predicted.len() {
        return Err(Error::dim(format!(
            "{} true labels but {} predictions",
            true_labels.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (&t, &p) in true_labels.iter().zip(predicted) {
        for label in [t, p] {
            if label >= num_classes {
                return Err(Error::LabelRange { label, num_classes });
            }
        }
        counts[t][p] += 1;
    }
    ConfusionMatrix::from_counts(counts)
}

pub const METRIC_NAMES: [&str; 6] = ["accuracy", "precision", "recall", "f1", "kappa", "hamming"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub kappa: f64,
    pub hamming_loss: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EvalReport {
    /// Metric values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [f64; 6] {
        [
            self.accuracy,
            self.precision_macro,
            self.recall_macro,
            self.f1_macro,
            self.kappa,
            self.hamming_loss,
        ]
    }
}

/// Cohen's kappa `(P_o - P_e) / (1 - P_e)` with `P_e = sum_i a_i b_i / n^2`.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.n as f64;
    let agree = cm.trace();
    let chance: u128 = cm
        .row_sums()
        .iter()
        .zip(cm.col_sums())
        .map(|(&a, b)| a as u128 * b as u128)
        .sum();
    let n2 = cm.n as u128 * cm.n as u128;
    if chance == n2 {
        return if agree == cm.n {
            Ok(1.0)
        } else {
            Err(Error::DegenerateMarginals(
                "expected agreement is 1 but observed agreement is below 1".into(),
            ))
        };
    }
    let p_o = agree as f64 / n;
    let p_e = chance as f64 / n2 as f64;
    Ok((p_o - p_e) / (1.0 - p_e))
}

pub fn evaluate(cm: &ConfusionMatrix) -> Result<EvalReport> {
    let k = cm.num_classes();
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let mut warnings = Vec::new();
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for i in 0..k {
        let tp = cm.counts[i][i] as f64;
        let p = if cols[i] > 0 {
            tp / cols[i] as f64
        } else {
            warnings.push(format!("class {i}: never predicted, precision taken as 0"));
            0.0
        };
        let r = if rows[i] > 0 {
            tp / rows[i] as f64
        } else {
            warnings.push(format!("class {i}: absent from truth, recall taken as 0"));
            0.0
        };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        p_sum += p;
        r_sum += r;
        f_sum += f;
    }
    let accuracy = cm.trace() as f64 / cm.n as f64;
    Ok(EvalReport {
        accuracy,
        precision_macro: p_sum / k as f64,
        recall_macro: r_sum / k as f64,
        f1_macro: f_sum / k as f64,
        kappa: kappa(cm)?,
        hamming_loss: 1.0 - accuracy,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub max: f64,
    pub min: f64,
    pub ave: f64,
    pub var: f64,
}

impl MetricStats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("cannot aggregate zero runs".into()));
        }
        let n = values.len() as f64;
        let ave = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - ave) * (v - ave)).sum();
        let var = if values.len() > 1 { ss / (n - 1.0) } else { 0.0 };
        Ok(Self {
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            ave,
            var,
        })
    }
}

/// Statistics of each metric, in [`METRIC_NAMES`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub accuracy: MetricStats,
    pub precision: MetricStats,
    pub recall: MetricStats,
    pub f1: MetricStats,
    pub kappa: MetricStats,
    pub hamming: MetricStats,
}

impl Summary {
    pub fn as_array(&self) -> [MetricStats; 6] {
        [self.accuracy, self.precision, self.recall, self.f1, self.kappa, self.hamming]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTable {
    pub runs: Vec<EvalReport>,
    pub summary: Summary,
}

pub fn aggregate(reports: &[EvalReport]) -> Result<RunTable> {
    let column = |m: usize| -> Result<MetricStats> {
        MetricStats::of(&reports.iter().map(|r| r.values()[m]).collect::<Vec<_>>())
    };
    Ok(RunTable {
        runs: reports.to_vec(),
        summary: Summary {
            accuracy: column(0)?,
            precision: column(1)?,
            recall: column(2)?,
            f1: column(3)?,
            kappa: column(4)?,
            hamming: column(5)?,
        },
    })
}

impl RunTable {
    /// Runs as rows, metrics as columns, then Max/Min/Ave/Var rows.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<8}", "Run");
        for name in METRIC_NAMES {
            let _ = write!(out, "{name:>11}");
        }
        out.push('\n');
        for (i, r) in self.runs.iter().enumerate() {
            let _ = write!(out, "{:<8}", i + 1);
            for v in r.values() {
                let _ = write!(out, "{v:>11.4}");
            }
            out.push('\n');
        }
        let stats = self.summary.as_array();
        let rows: [(&str, fn(&MetricStats) -> f64); 4] = [
            ("Max", |s| s.max),
            ("Min", |s| s.min),
            ("Ave", |s| s.ave),
            ("Var", |s| s.var),
        ];
        for (label, get) in rows {
            let _ = write!(out, "{label:<8}");
            for s in &stats {
                let _ = write!(out, "{:>11.4}", get(s));
            }
            out.push('\n');
        }
        out
    }
}

/// Accuracy comparison across models: one row per model with its per-run
/// accuracies followed by Max/Min/Ave/Var. Failed runs print as `-`.
pub fn comparison_table(rows: &[(String, Vec<Option<f64>>)]) -> String {
    let runs = rows.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let width = rows.iter().map(|(m, _)| m.len()).max().unwrap_or(5).max(5) + 2;
    let mut out = format!("{:<width$}", "Model");
    for r in 1..=runs {
        let _ = write!(out, "{r:>8}");
    }
    for h in ["Max", "Min", "Ave", "Var"] {
        let _ = write!(out, "{h:>8}");
    }
    out.push('\n');
    for (model, accs) in rows {
        let _ = write!(out, "{model:<width$}");
        for a in accs {
            match a {
                Some(v) => {
                    let _ = write!(out, "{v:>8.4}");
                }
                None => {
                    let _ = write!(out, "{:>8}", "-");
                }
            }
        }
        for _ in accs.len()..runs {
            let _ = write!(out, "{:>8}", "-");
        }
        let ok: Vec<f64> = accs.iter().flatten().copied().collect();
        match MetricStats::of(&ok) {
            Ok(s) => {
                let _ = write!(out, "{:>8.4}{:>8.4}{:>8.4}{:>8.4}", s.max, s.min, s.ave, s.var);
            }
            Err(_) => {
                let _ = write!(out, "{:>8}{:>8}{:>8}{:>8}", "-", "-", "-", "-");
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(acc: f64) -> EvalReport {
        EvalReport {
            accuracy: acc,
            precision_macro: acc,
            recall_macro: acc,
            f1_macro: acc,
            kappa: acc,
            hamming_loss: 1.0 - acc,
            warnings: vec![],
        }
    }

    #[test]
    fn diagonal_is_perfect() {
        let cm = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        let r = evaluate(&cm).unwrap();
        assert_eq!(r.values(), [1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn anti_diagonal() {
        let cm = confusion(&[0, 1], &[1, 0], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn chance_level_kappa_is_zero() {
        let cm = ConfusionMatrix::from_counts(vec![vec![25, 25], vec![25, 25]]).unwrap();
        assert_eq!(kappa(&cm).unwrap(), 0.0);
    }

    #[test]
    fn single_class_perfect_kappa_is_one() {
        let cm = ConfusionMatrix::from_counts(vec![vec![5, 0], vec![0, 0]]).unwrap();
        assert_eq!(kappa(&cm).unwrap(), 1.0);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            confusion(&[0, 3], &[0, 1], 3),
            Err(Error::LabelRange { label: 3, num_classes: 3 })
        ));
    }

    #[test]
    fn missing_prediction_warns() {
        let cm = confusion(&[0, 1, 1], &[0, 0, 0], 2).unwrap();
        let r = evaluate(&cm).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert!(r.precision_macro >= 0.0);
    }

    #[test]
    fn singleton_aggregate() {
        let t = aggregate(&[report(0.8)]).unwrap();
        let s = t.summary.accuracy;
        assert_eq!((s.max, s.min, s.ave, s.var), (0.8, 0.8, 0.8, 0.0));
    }

    #[test]
    fn empty_aggregate_is_error() {
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn text_table_shape() {
        let t = aggregate(&[report(0.9), report(0.8)]).unwrap();
        let text = t.to_text();
        assert_eq!(text.lines().count(), 1 + 2 + 4);
        assert!(text.lines().last().unwrap().starts_with("Var"));
        let cmp = comparison_table(&[("olce".into(), vec![Some(0.9), None])]);
        assert_eq!(cmp.lines().count(), 2);
    }
}
