//! Gradient boosting over CART base learners, squared loss, three growth
//! flavors: classic level-wise trees, second-order trees with shrunken leaf
//! values sum/(n + lambda), and best-first leaf-wise trees capped by leaf
//! count. With squared loss every round fits the current residuals.

use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, grow_tree_leafwise, LeafRule, Node, TreeParams};
use super::BoostFlavor;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostHead {
    base: f64,
    learning_rate: f64,
    trees: Vec<Node>,
    /// Training MSE after the base score, then after each round.
    pub train_loss: Vec<f64>,
}

pub(crate) fn fit(
    x: &Matrix,
    y: &[f64],
    flavor: &BoostFlavor,
    n_estimators: usize,
    learning_rate: f64,
    min_samples_split: usize,
) -> BoostHead {
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut current: Vec<f64> = vec![base; n];
    let mse = |current: &[f64]| -> f64 {
        y.iter()
            .zip(current)
            .map(|(a, f)| (a - f) * (a - f))
            .sum::<f64>()
            / n as f64
    };

    let mut trees = Vec::with_capacity(n_estimators);
    let mut train_loss = Vec::with_capacity(n_estimators + 1);
    train_loss.push(mse(&current));

    for _ in 0..n_estimators {
        let residuals: Vec<f64> = y.iter().zip(&current).map(|(a, f)| a - f).collect();
        let tree = match flavor {
            BoostFlavor::Levelwise { max_depth } => grow_tree(
                x,
                &residuals,
                &TreeParams {
                    max_depth: *max_depth,
                    min_samples_split,
                    leaf_rule: LeafRule::Mean,
                },
            ),
            BoostFlavor::SecondOrder { max_depth, lambda } => grow_tree(
                x,
                &residuals,
                &TreeParams {
                    max_depth: *max_depth,
                    min_samples_split,
                    leaf_rule: LeafRule::Shrunken { lambda: *lambda },
                },
            ),
            BoostFlavor::Leafwise { num_leaves } => grow_tree_leafwise(
                x,
                &residuals,
                *num_leaves,
                min_samples_split,
                LeafRule::Mean,
            ),
        };
        for (f, row) in current.iter_mut().zip(x.iter_rows()) {
            *f += learning_rate * tree.predict(row);
        }
        trees.push(tree);
        train_loss.push(mse(&current));
    }

    BoostHead {
        base,
        learning_rate,
        trees,
        train_loss,
    }
}

impl BoostHead {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let mut f = self.base;
        for tree in &self.trees {
            f += self.learning_rate * tree.predict(x);
        }
        f
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}
