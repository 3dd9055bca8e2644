//! CART regression trees: greedy best splits maximizing the squared-error
//! reduction, with two leaf-value rules (plain mean, or the shrunken
//! second-order value sum/(n + lambda) used by the second-order booster).
//!
//! Both the split score and the leaf value share the sum/(n + lambda) form
//! so that lambda = 0 reproduces plain CART bit for bit.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

/// How a leaf turns its targets into a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LeafRule {
    /// Arithmetic mean of the leaf targets.
    Mean,
    /// sum / (n + lambda): the closed-form second-order value for squared
    /// loss, where every sample has unit hessian.
    Shrunken { lambda: f64 },
}

impl LeafRule {
    fn lambda(&self) -> f64 {
        match self {
            LeafRule::Mean => 0.0,
            LeafRule::Shrunken { lambda } => *lambda,
        }
    }

    fn value(&self, sum: f64, n: usize) -> f64 {
        sum / (n as f64 + self.lambda())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub leaf_rule: LeafRule,
}

/// A standalone CART head.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeHead {
    pub root: Node,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
    /// Row ids going left (x <= threshold), then right.
    left: Vec<usize>,
    right: Vec<usize>,
}

fn leaf_score(sum: f64, n: usize, lambda: f64) -> f64 {
    sum * sum / (n as f64 + lambda)
}

/// Best split over all features for the given rows, or None when nothing
/// improves the score. Ties keep the first candidate encountered (lowest
/// feature index, then lowest threshold).
fn best_split(x: &Matrix, t: &[f64], rows: &[usize], lambda: f64) -> Option<BestSplit> {
    let n = rows.len();
    let total: f64 = rows.iter().map(|&r| t[r]).sum();
    let parent = leaf_score(total, n, lambda);

    let mut best: Option<BestSplit> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for feature in 0..x.cols() {
        order.sort_by(|&a, &b| x.get(a, feature).total_cmp(&x.get(b, feature)));
        let mut left_sum = 0.0;
        for p in 1..n {
            left_sum += t[order[p - 1]];
            let xl = x.get(order[p - 1], feature);
            let xr = x.get(order[p], feature);
            if xl == xr {
                continue;
            }
            let gain =
                leaf_score(left_sum, p, lambda) + leaf_score(total - left_sum, n - p, lambda)
                    - parent;
            if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                best = Some(BestSplit {
                    gain,
                    feature,
                    threshold: (xl + xr) / 2.0,
                    left: order[..p].to_vec(),
                    right: order[p..].to_vec(),
                });
            }
        }
    }
    best
}

fn grow(x: &Matrix, t: &[f64], rows: &[usize], params: &TreeParams, depth: usize) -> Node {
    let n = rows.len();
    let sum: f64 = rows.iter().map(|&r| t[r]).sum();
    let leaf = |sum: f64, n: usize| Node::Leaf {
        value: params.leaf_rule.value(sum, n),
    };

    if n < params.min_samples_split || params.max_depth.is_some_and(|d| depth >= d) {
        return leaf(sum, n);
    }
    let first = t[rows[0]];
    if rows.iter().all(|&r| t[r] == first) {
        return leaf(sum, n);
    }
    match best_split(x, t, rows, params.leaf_rule.lambda()) {
        None => leaf(sum, n),
        Some(split) => Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(grow(x, t, &split.left, params, depth + 1)),
            right: Box::new(grow(x, t, &split.right, params, depth + 1)),
        },
    }
}

/// Grow a depth-first CART on all rows.
pub fn grow_tree(x: &Matrix, targets: &[f64], params: &TreeParams) -> Node {
    let rows: Vec<usize> = (0..x.rows()).collect();
    grow_tree_on(x, targets, &rows, params)
}

pub(crate) fn grow_tree_on(
    x: &Matrix,
    targets: &[f64],
    rows: &[usize],
    params: &TreeParams,
) -> Node {
    assert!(!rows.is_empty(), "cannot grow a tree on zero rows");
    grow(x, targets, rows, params, 0)
}

/// Best-first growth: repeatedly split the leaf with the largest gain until
/// `num_leaves` is reached or no split improves the score. Gain ties break
/// toward the earliest-created leaf.
pub fn grow_tree_leafwise(
    x: &Matrix,
    targets: &[f64],
    num_leaves: usize,
    min_samples_split: usize,
    leaf_rule: LeafRule,
) -> Node {
    assert!(x.rows() > 0, "cannot grow a tree on zero rows");
    let params = TreeParams {
        max_depth: None,
        min_samples_split,
        leaf_rule,
    };

    enum Arena {
        Leaf { rows: Vec<usize> },
        Split { feature: usize, threshold: f64, left: usize, right: usize },
    }

    let mut nodes = vec![Arena::Leaf {
        rows: (0..x.rows()).collect(),
    }];
    // (node id, precomputed best split); refreshed when a leaf is created
    let mut frontier: Vec<(usize, Option<BestSplit>)> = Vec::new();

    let candidate = |rows: &[usize]| -> Option<BestSplit> {
        if rows.len() < params.min_samples_split {
            return None;
        }
        best_split(x, targets, rows, leaf_rule.lambda())
    };
    let first_rows: Vec<usize> = (0..x.rows()).collect();
    frontier.push((0, candidate(&first_rows)));

    let mut n_leaves = 1usize;
    while n_leaves < num_leaves {
        let Some(pick) = frontier
            .iter()
            .enumerate()
            .filter(|(_, (_, split))| split.is_some())
            .max_by(|(_, (id_a, a)), (_, (id_b, b))| {
                let ga = a.as_ref().unwrap().gain;
                let gb = b.as_ref().unwrap().gain;
                // ties go to the earliest-created node
                ga.total_cmp(&gb).then(id_b.cmp(id_a))
            })
            .map(|(i, _)| i)
        else {
            break;
        };
        let (node_id, split) = frontier.swap_remove(pick);
        let split = split.unwrap();

        let left_id = nodes.len();
        nodes.push(Arena::Leaf { rows: split.left });
        let right_id = nodes.len();
        nodes.push(Arena::Leaf { rows: split.right });
        nodes[node_id] = Arena::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left_id,
            right: right_id,
        };
        for id in [left_id, right_id] {
            let rows = match &nodes[id] {
                Arena::Leaf { rows } => rows.clone(),
                Arena::Split { .. } => unreachable!(),
            };
            frontier.push((id, candidate(&rows)));
        }
        n_leaves += 1;
    }

    fn materialize(nodes: &[Arena], id: usize, t: &[f64], rule: LeafRule) -> Node {
        match &nodes[id] {
            Arena::Leaf { rows } => {
                let sum: f64 = rows.iter().map(|&r| t[r]).sum();
                Node::Leaf {
                    value: rule.value(sum, rows.len()),
                }
            }
            Arena::Split {
                feature,
                threshold,
                left,
                right,
            } => Node::Split {
                feature: *feature,
                threshold: *threshold,
                left: Box::new(materialize(nodes, *left, t, rule)),
                right: Box::new(materialize(nodes, *right, t, rule)),
            },
        }
    }
    materialize(&nodes, 0, targets, leaf_rule)
}
