//! CART classification tree with Gini impurity.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::TreeParams;
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        distribution: Vec<f64>,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub n_classes: usize,
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    k: usize,
    params: &'a TreeParams,
    max_features: usize,
    n_features: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &i in rows {
            c[self.y[i]] += 1;
        }
        c
    }

    fn leaf(&mut self, counts: &[usize]) -> usize {
        let n: usize = counts.iter().sum();
        let distribution = counts.iter().map(|&c| c as f64 / n as f64).collect();
        self.nodes.push(Node::Leaf { distribution });
        self.nodes.len() - 1
    }

    fn best_split(&self, rows: &[usize], rng: &mut Rng) -> Option<BestSplit> {
        let candidates: Vec<usize> = if self.max_features < self.n_features {
            let mut f = index::sample(rng, self.n_features, self.max_features).into_vec();
            f.sort_unstable();
            f
        } else {
            (0..self.n_features).collect()
        };
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf;
        let total = self.counts(rows);
        let mut best: Option<BestSplit> = None;
        let mut sorted = rows.to_vec();
        for f in candidates {
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = vec![0usize; self.k];
            for pos in 0..n - 1 {
                left[self.y[sorted[pos]]] += 1;
                let n_left = pos + 1;
                let (lo, hi) = (self.x[sorted[pos]][f], self.x[sorted[pos + 1]][f]);
                if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let impurity = (n_left as f64 * gini(&left) + (n - n_left) as f64 * gini(&right)) / n as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: &[usize], depth: usize, rng: &mut Rng) -> usize {
        let counts = self.counts(rows);
        let impurity = gini(&counts);
        let depth_ok = self.params.max_depth.is_none_or(|m| depth < m);
        if impurity <= 0.0 || !depth_ok || rows.len() < 2 * self.params.min_samples_leaf {
            return self.leaf(&counts);
        }
        let Some(split) = self.best_split(rows, rng) else {
            return self.leaf(&counts);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][split.feature] <= split.threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            distribution: Vec::new(),
        });
        let left = self.grow(&l, depth + 1, rng);
        let right = self.grow(&r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

impl DecisionTree {
    /// Grows a tree on `rows` (indices into `x`, repeats allowed). When
    /// `max_features` is below the feature count each split considers a
    /// random feature subset drawn from `rng`; otherwise `rng` is untouched.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        k: usize,
        rows: &[usize],
        params: &TreeParams,
        max_features: usize,
        rng: &mut Rng,
    ) -> Self {
        let n_features = x.first().map_or(0, Vec::len);
        let mut b = Builder {
            x,
            y,
            k,
            params,
            max_features: max_features.clamp(1, n_features.max(1)),
            n_features,
            nodes: Vec::new(),
        };
        b.grow(rows, 0, rng);
        DecisionTree {
            n_features,
            n_classes: k,
            nodes: b.nodes,
        }
    }

    fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { distribution } => return distribution,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        out[..self.n_classes].copy_from_slice(self.leaf_for(x));
    }

    pub(super) fn is_consistent(&self, d: usize, k: usize) -> bool {
        if self.n_features != d || self.n_classes != k || self.nodes.is_empty() {
            return false;
        }
        // children must point forward so traversal always terminates
        self.nodes.iter().enumerate().all(|(id, node)| match node {
            Node::Leaf { distribution } => {
                distribution.len() == k && distribution.iter().all(|p| p.is_finite() && *p >= 0.0)
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                *feature < d
                    && !threshold.is_nan()
                    && *left > id
                    && *right > id
                    && *left < self.nodes.len()
                    && *right < self.nodes.len()
            }
        })
    }
}
