//! CART-style classification tree grown greedily on Gini impurity.

use serde::{Deserialize, Serialize};

use super::{flatten, train_features, Classifier};
use crate::error::{Error, Result};
use crate::signalio::{ResponseSample, SplitView};

/// `sum_k p_k (1 - p_k)` over the class proportions of `counts`.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * (1.0 - p)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    /// Threshold candidates evaluated per feature per node.
    pub max_candidates: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 10,
            max_candidates: 64,
        }
    }
}

/// Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        counts: Vec<usize>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    /// Majority class of a leaf distribution; lowest index on ties.
    fn majority(counts: &[usize]) -> usize {
        let mut best = 0;
        for (k, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = k;
            }
        }
        best
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { counts } => return Self::majority(counts),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    /// Longest root-to-leaf path, counted in splits.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<&Vec<usize>> {
        match self {
            TreeNode::Leaf { counts } => vec![counts],
            TreeNode::Split { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    k: usize,
    cfg: TreeConfig,
}

struct BestSplit {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn grow(&self, idx: Vec<usize>, depth: usize) -> TreeNode {
        let counts = self.counts(&idx);
        let parent = gini(&counts);
        if depth >= self.cfg.max_depth || idx.len() < 2 || parent == 0.0 {
            return TreeNode::Leaf { counts };
        }
        let Some(best) = self.best_split(&idx, &counts) else {
            return TreeNode::Leaf { counts };
        };
        if best.impurity >= parent {
            return TreeNode::Leaf { counts };
        }
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][best.feature] <= best.threshold);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(self.grow(left, depth + 1)),
            right: Box::new(self.grow(right, depth + 1)),
        }
    }

    fn best_split(&self, idx: &[usize], counts: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let d = self.x[idx[0]].len();
        let mut best: Option<BestSplit> = None;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut boundaries: Vec<usize> = Vec::with_capacity(n);
        for f in 0..d {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x[i][f], self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            // positions p where pairs[p - 1].0 < pairs[p].0: midpoint candidates
            boundaries.clear();
            boundaries.extend((1..n).filter(|&p| pairs[p - 1].0 < pairs[p].0));
            if boundaries.is_empty() {
                continue;
            }
            let m = boundaries.len();
            let take = self.cfg.max_candidates.max(1).min(m);
            let mut left = vec![0usize; self.k];
            let mut cursor = 0;
            for c in 0..take {
                // evenly spaced over the available boundaries
                let p = boundaries[if take == m { c } else { c * (m - 1) / (take - 1).max(1) }];
                while cursor < p {
                    left[pairs[cursor].1] += 1;
                    cursor += 1;
                }
                let right: Vec<usize> = counts.iter().zip(&left).map(|(t, l)| t - l).collect();
                let nl = p as f64;
                let nr = (n - p) as f64;
                let impurity = (nl * gini(&left) + nr * gini(&right)) / n as f64;
                if best.as_ref().map_or(true, |b| impurity < b.impurity) {
                    best = Some(BestSplit {
                        impurity,
                        feature: f,
                        threshold: 0.5 * (pairs[p - 1].0 + pairs[p].0),
                    });
                }
            }
        }
        best
    }
}

/// Gini decision tree over flattened samples.
#[derive(Debug, Clone, Default)]
pub struct DecisionTree {
    pub config: TreeConfig,
    pub root: Option<TreeNode>,
}

impl DecisionTree {
    pub fn new(config: TreeConfig) -> Self {
        Self { config, root: None }
    }

    pub fn fit_features(&mut self, x: &[Vec<f64>], y: &[usize], num_classes: usize) -> Result<()> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Fit("decision tree needs a non-empty, labelled training set".into()));
        }
        let grower = Grower {
            x,
            y,
            k: num_classes,
            cfg: self.config,
        };
        self.root = Some(grower.grow((0..x.len()).collect(), 0));
        Ok(())
    }

    pub fn predict_features(&self, x: &[f64]) -> Result<usize> {
        let root = self
            .root
            .as_ref()
            .ok_or_else(|| Error::Fit("decision tree is not fitted".into()))?;
        Ok(root.predict(x))
    }
}

impl Classifier for DecisionTree {
    fn name(&self) -> &'static str {
        "dt"
    }

    fn fit(&mut self, data: &dyn SplitView) -> Result<()> {
        let (x, y) = train_features(data)?;
        self.fit_features(&x, &y, data.num_classes())
    }

    fn predict(&self, sample: &ResponseSample) -> Result<usize> {
        self.predict_features(&flatten(sample))
    }

    fn dump(&self) -> Result<serde_json::Value> {
        Ok(serde_json::json!({ "config": self.config, "root": self.root }))
    }
}
