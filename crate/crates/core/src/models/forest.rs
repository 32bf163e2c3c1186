use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DecisionTree, ForestParams, TreeParams};
use crate::seed::{derive_seed, rng_from_seed};

/// Bagged CART trees with per-split feature subsampling. The predicted
/// distribution is the mean of the trees' leaf distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Each tree draws from its own generator derived from `seed` and the
    /// tree index, so parallel training matches a sequential run.
    pub fn fit(x: &[Vec<f64>], y: &[usize], k: usize, tree: &TreeParams, forest: &ForestParams, seed: u64) -> Self {
        let n = x.len();
        let d = x.first().map_or(0, Vec::len);
        let max_features = forest
            .max_features
            .unwrap_or_else(|| ((d as f64).sqrt().round() as usize).max(1));
        let trees = (0..forest.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_from_seed(derive_seed(seed, "tree", &[t as u64]));
                let rows: Vec<usize> = if forest.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(x, y, k, &rows, tree, max_features, &mut rng)
            })
            .collect();
        RandomForest {
            n_features: d,
            n_classes: k,
            trees,
        }
    }

    pub fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        let k = self.n_classes;
        out[..k].fill(0.0);
        let mut buf = vec![0.0; k];
        for t in &self.trees {
            t.predict_into(x, &mut buf);
            for (o, p) in out.iter_mut().zip(&buf) {
                *o += p;
            }
        }
        let m = self.trees.len() as f64;
        for o in out[..k].iter_mut() {
            *o /= m;
        }
    }

    pub(super) fn is_consistent(&self, d: usize, k: usize) -> bool {
        self.n_features == d
            && self.n_classes == k
            && !self.trees.is_empty()
            && self.trees.iter().all(|t| t.is_consistent(d, k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn data() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = rng_from_seed(4);
        let x: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y = x.iter().map(|r| usize::from(r[0] + 0.5 * r[2] > 0.0)).collect();
        (x, y)
    }

    #[test]
    fn single_full_tree_without_bootstrap_equals_a_tree() {
        let (x, y) = data();
        let tree_params = TreeParams::default();
        let forest = RandomForest::fit(
            &x,
            &y,
            2,
            &tree_params,
            &ForestParams {
                trees: 1,
                max_features: Some(4),
                bootstrap: false,
            },
            77,
        );
        let rows: Vec<usize> = (0..x.len()).collect();
        let tree = DecisionTree::fit(&x, &y, 2, &rows, &tree_params, 4, &mut rng_from_seed(0));
        assert_eq!(forest.trees[0], tree);
    }

    #[test]
    fn parallel_fit_is_reproducible() {
        let (x, y) = data();
        let a = RandomForest::fit(&x, &y, 2, &TreeParams::default(), &ForestParams::default(), 5);
        let b = RandomForest::fit(&x, &y, 2, &TreeParams::default(), &ForestParams::default(), 5);
        assert_eq!(a, b);
        assert_eq!(a.trees.len(), 50);
    }
}
