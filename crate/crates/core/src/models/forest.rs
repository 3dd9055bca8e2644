//! Bagged CART ensemble. Every split sees all features; randomness enters
//! only through bootstrap resampling, so a single tree without bootstrap is
//! exactly the plain CART.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree_on, LeafRule, Node, TreeParams};
use super::mix_seed;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestHead {
    trees: Vec<Node>,
}

pub(crate) fn fit(
    x: &Matrix,
    y: &[f64],
    params: ForestParams,
    seed: u64,
    head_idx: u64,
) -> ForestHead {
    let n = x.rows();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        leaf_rule: LeafRule::Mean,
    };
    // per-tree RNG streams keyed by (seed, head, tree): parallel equals sequential
    let trees: Vec<Node> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let rows: Vec<usize> = if params.bootstrap {
                let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, head_idx, t as u64));
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree_on(x, y, &rows, &tree_params)
        })
        .collect();
    ForestHead { trees }
}

impl ForestHead {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / self.trees.len() as f64
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::grow_tree;

    fn toy() -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..24)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - r[1]).collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn single_tree_without_bootstrap_equals_cart() {
        let (x, y) = toy();
        let params = ForestParams {
            n_estimators: 1,
            max_depth: Some(4),
            min_samples_split: 2,
            bootstrap: false,
        };
        let forest = fit(&x, &y, params, 123, 0);
        let cart = grow_tree(
            &x,
            &y,
            &TreeParams {
                max_depth: Some(4),
                min_samples_split: 2,
                leaf_rule: LeafRule::Mean,
            },
        );
        for i in 0..x.rows() {
            assert_eq!(forest.predict_one(x.row(i)), cart.predict(x.row(i)));
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = toy();
        let params = ForestParams {
            n_estimators: 20,
            max_depth: None,
            min_samples_split: 2,
            bootstrap: true,
        };
        let a = fit(&x, &y, params, 9, 0);
        let b = fit(&x, &y, params, 9, 0);
        for i in 0..x.rows() {
            assert_eq!(a.predict_one(x.row(i)), b.predict_one(x.row(i)));
        }
    }

    #[test]
    fn different_heads_draw_different_bootstraps() {
        let (x, y) = toy();
        let params = ForestParams {
            n_estimators: 5,
            max_depth: Some(3),
            min_samples_split: 2,
            bootstrap: true,
        };
        let a = fit(&x, &y, params, 9, 0);
        let b = fit(&x, &y, params, 9, 1);
        let differs = (0..x.rows()).any(|i| a.predict_one(x.row(i)) != b.predict_one(x.row(i)));
        assert!(differs);
    }
}
