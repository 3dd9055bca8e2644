//! Native implementations of the ten regressors behind one fit/predict
//! contract. A multi-output model is realized as one independently fitted
//! single-output head per target column.
//!
//! Scale-sensitive kinds (SVR and the regularized linear models)
//! standardize features internally from the training data; tree and
//! neighbor models consume raw features.

mod boosting;
mod forest;
mod knn;
mod linear;
mod standardize;
mod svr;
mod tree;

pub use boosting::BoostHead;
pub use forest::ForestHead;
pub use knn::{KnnHead, WeightKind};
pub use linear::{coordinate_descent, fit_ridge, CdFit, LinearHead};
pub use standardize::Standardizer;
pub use svr::{kernel_matrix, solve_svr_dual, solve_svr_dual_capped, KernelKind, SvrDual, SvrHead};
pub use tree::{grow_tree, grow_tree_leafwise, LeafRule, Node, TreeParams};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::SupervisedSet;
use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("expected {expected} feature columns, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("training data is empty")]
    EmptyData,
    #[error("{what} did not converge: residual violation {residual:e}")]
    Convergence { what: &'static str, residual: f64 },
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("cannot deserialize model: {0}")]
    Format(String),
}

/// The model families of the suite, one per Table row of the study design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "CART")]
    Cart,
    #[serde(rename = "RANDOM_FOREST")]
    RandomForest,
    #[serde(rename = "GB_LEVELWISE")]
    GbLevelwise,
    #[serde(rename = "GB_SECOND_ORDER")]
    GbSecondOrder,
    #[serde(rename = "GB_LEAFWISE")]
    GbLeafwise,
    #[serde(rename = "SVR")]
    Svr,
    #[serde(rename = "RIDGE")]
    Ridge,
    #[serde(rename = "LASSO")]
    Lasso,
    #[serde(rename = "ELASTIC_NET")]
    ElasticNet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 10] = [
        ModelKind::Knn,
        ModelKind::Cart,
        ModelKind::RandomForest,
        ModelKind::GbLevelwise,
        ModelKind::GbSecondOrder,
        ModelKind::GbLeafwise,
        ModelKind::Svr,
        ModelKind::Ridge,
        ModelKind::Lasso,
        ModelKind::ElasticNet,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Knn => "KNN",
            ModelKind::Cart => "CART",
            ModelKind::RandomForest => "RANDOM_FOREST",
            ModelKind::GbLevelwise => "GB_LEVELWISE",
            ModelKind::GbSecondOrder => "GB_SECOND_ORDER",
            ModelKind::GbLeafwise => "GB_LEAFWISE",
            ModelKind::Svr => "SVR",
            ModelKind::Ridge => "RIDGE",
            ModelKind::Lasso => "LASSO",
            ModelKind::ElasticNet => "ELASTIC_NET",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        ModelKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == norm)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hyperparameter value; `Null` encodes "unlimited" (e.g. max_depth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    fn type_name(&self) -> &'static str {
        match self {
            ParamValue::Null => "null",
            ParamValue::Bool(_) => "bool",
            ParamValue::Int(_) => "int",
            ParamValue::Float(_) => "float",
            ParamValue::Str(_) => "string",
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}
impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}
impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}
impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

/// Declarative model configuration: kind, hyperparameters, RNG seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            params: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(name.to_string(), value.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Check hyperparameter names and values without fitting.
    pub fn validate(&self) -> Result<(), ModelError> {
        ResolvedSpec::resolve(self).map(|_| ())
    }
}

fn allowed_params(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Knn => &["n_neighbors", "weights"],
        ModelKind::Cart => &["max_depth", "min_samples_split"],
        ModelKind::RandomForest => &[
            "n_estimators",
            "max_depth",
            "min_samples_split",
            "bootstrap",
        ],
        ModelKind::GbLevelwise => &[
            "n_estimators",
            "learning_rate",
            "max_depth",
            "min_samples_split",
        ],
        ModelKind::GbSecondOrder => &[
            "n_estimators",
            "learning_rate",
            "max_depth",
            "min_samples_split",
            "lambda",
        ],
        ModelKind::GbLeafwise => &[
            "n_estimators",
            "learning_rate",
            "num_leaves",
            "min_samples_split",
        ],
        ModelKind::Svr => &["C", "epsilon", "kernel", "gamma", "tol", "max_iter"],
        ModelKind::Ridge => &["alpha"],
        ModelKind::Lasso => &["alpha", "tol", "max_iter"],
        ModelKind::ElasticNet => &["alpha", "l1_ratio", "tol", "max_iter"],
    }
}

/// Typed view over a spec's parameter map with defaults applied.
struct Params<'a>(&'a ModelSpec);

impl Params<'_> {
    fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.params.get(name)
    }

    fn err(&self, name: &str, got: &ParamValue, want: &str) -> ModelError {
        ModelError::Spec(format!(
            "{}: `{name}` expects {want}, got {} value",
            self.0.kind,
            got.type_name()
        ))
    }

    fn f64_or(&self, name: &str, default: f64) -> Result<f64, ModelError> {
        match self.get(name) {
            None => Ok(default),
            Some(ParamValue::Float(v)) => Ok(*v),
            Some(ParamValue::Int(v)) => Ok(*v as f64),
            Some(other) => Err(self.err(name, other, "a number")),
        }
    }

    fn usize_or(&self, name: &str, default: usize) -> Result<usize, ModelError> {
        match self.get(name) {
            None => Ok(default),
            Some(ParamValue::Int(v)) if *v >= 0 => Ok(*v as usize),
            Some(other) => Err(self.err(name, other, "a non-negative integer")),
        }
    }

    fn opt_usize_or(
        &self,
        name: &str,
        default: Option<usize>,
    ) -> Result<Option<usize>, ModelError> {
        match self.get(name) {
            None => Ok(default),
            Some(ParamValue::Null) => Ok(None),
            Some(ParamValue::Int(v)) if *v >= 1 => Ok(Some(*v as usize)),
            Some(other) => Err(self.err(name, other, "null or a positive integer")),
        }
    }

    fn bool_or(&self, name: &str, default: bool) -> Result<bool, ModelError> {
        match self.get(name) {
            None => Ok(default),
            Some(ParamValue::Bool(v)) => Ok(*v),
            Some(other) => Err(self.err(name, other, "a bool")),
        }
    }

    fn str_or(&self, name: &str, default: &str) -> Result<String, ModelError> {
        match self.get(name) {
            None => Ok(default.to_string()),
            Some(ParamValue::Str(v)) => Ok(v.clone()),
            Some(other) => Err(self.err(name, other, "a string")),
        }
    }
}

/// Fully resolved, validated hyperparameters for one kind.
#[derive(Debug, Clone)]
enum ResolvedSpec {
    Knn {
        k: usize,
        weights: WeightKind,
    },
    Cart {
        max_depth: Option<usize>,
        min_samples_split: usize,
    },
    Forest {
        n_estimators: usize,
        max_depth: Option<usize>,
        min_samples_split: usize,
        bootstrap: bool,
    },
    Boost {
        flavor: BoostFlavor,
        n_estimators: usize,
        learning_rate: f64,
        min_samples_split: usize,
    },
    Svr {
        c: f64,
        epsilon: f64,
        kernel: KernelKind,
        gamma: Option<f64>,
        tol: f64,
        max_iter: usize,
    },
    Ridge {
        alpha: f64,
    },
    Net {
        alpha: f64,
        l1_ratio: f64,
        tol: f64,
        max_iter: usize,
    },
}

#[derive(Debug, Clone, Copy)]
enum BoostFlavor {
    Levelwise { max_depth: Option<usize> },
    SecondOrder { max_depth: Option<usize>, lambda: f64 },
    Leafwise { num_leaves: usize },
}

impl ResolvedSpec {
    fn resolve(spec: &ModelSpec) -> Result<ResolvedSpec, ModelError> {
        let allowed = allowed_params(spec.kind);
        for name in spec.params.keys() {
            if !allowed.contains(&name.as_str()) {
                return Err(ModelError::Spec(format!(
                    "{}: unknown hyperparameter `{name}`",
                    spec.kind
                )));
            }
        }
        let p = Params(spec);
        let positive = |name: &str, v: f64| -> Result<f64, ModelError> {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(ModelError::Spec(format!(
                    "{}: `{name}` must be positive, got {v}",
                    spec.kind
                )))
            }
        };
        let non_negative = |name: &str, v: f64| -> Result<f64, ModelError> {
            if v >= 0.0 {
                Ok(v)
            } else {
                Err(ModelError::Spec(format!(
                    "{}: `{name}` must be non-negative, got {v}",
                    spec.kind
                )))
            }
        };

        Ok(match spec.kind {
            ModelKind::Knn => {
                let k = p.usize_or("n_neighbors", 5)?;
                if k == 0 {
                    return Err(ModelError::Spec("KNN: `n_neighbors` must be >= 1".into()));
                }
                let weights = match p.str_or("weights", "uniform")?.as_str() {
                    "uniform" => WeightKind::Uniform,
                    "distance" => WeightKind::Distance,
                    other => {
                        return Err(ModelError::Spec(format!(
                            "KNN: `weights` must be uniform|distance, got `{other}`"
                        )))
                    }
                };
                ResolvedSpec::Knn { k, weights }
            }
            ModelKind::Cart => ResolvedSpec::Cart {
                max_depth: p.opt_usize_or("max_depth", None)?,
                min_samples_split: p.usize_or("min_samples_split", 2)?,
            },
            ModelKind::RandomForest => ResolvedSpec::Forest {
                n_estimators: p.usize_or("n_estimators", 100)?.max(1),
                max_depth: p.opt_usize_or("max_depth", None)?,
                min_samples_split: p.usize_or("min_samples_split", 2)?,
                bootstrap: p.bool_or("bootstrap", true)?,
            },
            ModelKind::GbLevelwise => ResolvedSpec::Boost {
                flavor: BoostFlavor::Levelwise {
                    max_depth: p.opt_usize_or("max_depth", Some(3))?,
                },
                n_estimators: p.usize_or("n_estimators", 100)?,
                learning_rate: positive("learning_rate", p.f64_or("learning_rate", 0.1)?)?,
                min_samples_split: p.usize_or("min_samples_split", 2)?,
            },
            ModelKind::GbSecondOrder => ResolvedSpec::Boost {
                flavor: BoostFlavor::SecondOrder {
                    max_depth: p.opt_usize_or("max_depth", Some(3))?,
                    lambda: non_negative("lambda", p.f64_or("lambda", 1.0)?)?,
                },
                n_estimators: p.usize_or("n_estimators", 100)?,
                learning_rate: positive("learning_rate", p.f64_or("learning_rate", 0.1)?)?,
                min_samples_split: p.usize_or("min_samples_split", 2)?,
            },
            ModelKind::GbLeafwise => {
                let num_leaves = p.usize_or("num_leaves", 31)?;
                if num_leaves < 2 {
                    return Err(ModelError::Spec(
                        "GB_LEAFWISE: `num_leaves` must be >= 2".into(),
                    ));
                }
                ResolvedSpec::Boost {
                    flavor: BoostFlavor::Leafwise { num_leaves },
                    n_estimators: p.usize_or("n_estimators", 100)?,
                    learning_rate: positive("learning_rate", p.f64_or("learning_rate", 0.1)?)?,
                    min_samples_split: p.usize_or("min_samples_split", 2)?,
                }
            }
            ModelKind::Svr => {
                let gamma = match p.get("gamma") {
                    None | Some(ParamValue::Null) => None,
                    Some(ParamValue::Float(v)) => Some(positive("gamma", *v)?),
                    Some(ParamValue::Int(v)) => Some(positive("gamma", *v as f64)?),
                    Some(other) => return Err(p.err("gamma", other, "null or a number")),
                };
                let kernel = match p.str_or("kernel", "rbf")?.as_str() {
                    "rbf" => KernelKind::Rbf,
                    "linear" => KernelKind::Linear,
                    other => {
                        return Err(ModelError::Spec(format!(
                            "SVR: `kernel` must be rbf|linear, got `{other}`"
                        )))
                    }
                };
                ResolvedSpec::Svr {
                    c: positive("C", p.f64_or("C", 1.0)?)?,
                    epsilon: non_negative("epsilon", p.f64_or("epsilon", 0.1)?)?,
                    kernel,
                    gamma,
                    tol: positive("tol", p.f64_or("tol", 1e-3)?)?,
                    max_iter: p.usize_or("max_iter", 100_000)?,
                }
            }
            ModelKind::Ridge => ResolvedSpec::Ridge {
                alpha: non_negative("alpha", p.f64_or("alpha", 1.0)?)?,
            },
            ModelKind::Lasso => ResolvedSpec::Net {
                alpha: non_negative("alpha", p.f64_or("alpha", 1.0)?)?,
                l1_ratio: 1.0,
                tol: positive("tol", p.f64_or("tol", 1e-7)?)?,
                max_iter: p.usize_or("max_iter", 10_000)?,
            },
            ModelKind::ElasticNet => {
                let l1_ratio = p.f64_or("l1_ratio", 0.5)?;
                if !(0.0..=1.0).contains(&l1_ratio) {
                    return Err(ModelError::Spec(format!(
                        "ELASTIC_NET: `l1_ratio` must be in [0, 1], got {l1_ratio}"
                    )));
                }
                ResolvedSpec::Net {
                    alpha: non_negative("alpha", p.f64_or("alpha", 1.0)?)?,
                    l1_ratio,
                    tol: positive("tol", p.f64_or("tol", 1e-7)?)?,
                    max_iter: p.usize_or("max_iter", 10_000)?,
                }
            }
        })
    }
}

/// One fitted single-output predictor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Head {
    Knn(KnnHead),
    Tree(tree::TreeHead),
    Forest(ForestHead),
    Boost(BoostHead),
    Svr(SvrHead),
    Linear(LinearHead),
}

impl Head {
    fn predict_one(&self, x: &[f64]) -> f64 {
        match self {
            Head::Knn(h) => h.predict_one(x),
            Head::Tree(h) => h.root.predict(x),
            Head::Forest(h) => h.predict_one(x),
            Head::Boost(h) => h.predict_one(x),
            Head::Svr(h) => h.predict_one(x),
            Head::Linear(h) => h.predict_one(x),
        }
    }
}

/// A fitted multi-output model: one head per target column, immutable and
/// safe to share across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    heads: Vec<Head>,
    input_len: usize,
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn horizon(&self) -> usize {
        self.heads.len()
    }

    pub fn heads(&self) -> &[Head] {
        &self.heads
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        if x.len() != self.input_len {
            return Err(ModelError::Shape {
                expected: self.input_len,
                got: x.len(),
            });
        }
        Ok(self.heads.iter().map(|h| h.predict_one(x)).collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        predict(self, x)
    }

    /// Per-head squared-error training curve (after base, then after each
    /// round); only boosting kinds record one.
    pub fn training_loss_curves(&self) -> Option<Vec<&[f64]>> {
        self.heads
            .iter()
            .map(|h| match h {
                Head::Boost(b) => Some(b.train_loss.as_slice()),
                _ => None,
            })
            .collect()
    }

    /// Raw-feature-space coefficients of a linear head.
    pub fn linear_coefficients(&self, head: usize) -> Option<(&[f64], f64)> {
        match self.heads.get(head) {
            Some(Head::Linear(h)) => Some((&h.weights, h.intercept)),
            _ => None,
        }
    }

    /// Self-describing versioned JSON; predictions after a round-trip are
    /// bitwise identical.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })
        .expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<TrainedModel, ModelError> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Format(format!(
                "unsupported format version {}",
                doc.format_version
            )));
        }
        Ok(doc.model)
    }
}

/// Derive an independent RNG stream id from (seed, head, tree) so parallel
/// and sequential fits see identical randomness.
pub(crate) fn mix_seed(seed: u64, head: u64, tree: u64) -> u64 {
    let mut z = seed
        ^ head.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ tree.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fit_head(
    resolved: &ResolvedSpec,
    x: &Matrix,
    y: &[f64],
    seed: u64,
    head_idx: usize,
) -> Result<Head, ModelError> {
    Ok(match resolved {
        ResolvedSpec::Knn { k, weights } => Head::Knn(knn::fit(x, y, *k, *weights)?),
        ResolvedSpec::Cart {
            max_depth,
            min_samples_split,
        } => {
            let params = TreeParams {
                max_depth: *max_depth,
                min_samples_split: *min_samples_split,
                leaf_rule: LeafRule::Mean,
            };
            Head::Tree(tree::TreeHead {
                root: grow_tree(x, y, &params),
            })
        }
        ResolvedSpec::Forest {
            n_estimators,
            max_depth,
            min_samples_split,
            bootstrap,
        } => Head::Forest(forest::fit(
            x,
            y,
            forest::ForestParams {
                n_estimators: *n_estimators,
                max_depth: *max_depth,
                min_samples_split: *min_samples_split,
                bootstrap: *bootstrap,
            },
            seed,
            head_idx as u64,
        )),
        ResolvedSpec::Boost {
            flavor,
            n_estimators,
            learning_rate,
            min_samples_split,
        } => Head::Boost(boosting::fit(
            x,
            y,
            flavor,
            *n_estimators,
            *learning_rate,
            *min_samples_split,
        )),
        ResolvedSpec::Svr {
            c,
            epsilon,
            kernel,
            gamma,
            tol,
            max_iter,
        } => Head::Svr(svr::fit(x, y, *c, *epsilon, *kernel, *gamma, *tol, *max_iter)?),
        ResolvedSpec::Ridge { alpha } => Head::Linear(linear::fit_ridge_standardized(x, y, *alpha)?),
        ResolvedSpec::Net {
            alpha,
            l1_ratio,
            tol,
            max_iter,
        } => Head::Linear(linear::fit_net_standardized(
            x, y, *alpha, *l1_ratio, *tol, *max_iter,
        )?),
    })
}

/// Fit one head per target column. Identical (spec, data) gives identical
/// predictions regardless of thread count.
pub fn fit(spec: &ModelSpec, data: &SupervisedSet) -> Result<TrainedModel, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let resolved = ResolvedSpec::resolve(spec)?;
    let columns: Vec<Vec<f64>> = (0..data.horizon()).map(|j| data.y.column(j)).collect();
    let heads: Result<Vec<Head>, ModelError> = columns
        .par_iter()
        .enumerate()
        .map(|(h, y)| fit_head(&resolved, &data.x, y, spec.seed, h))
        .collect();
    Ok(TrainedModel {
        spec: spec.clone(),
        heads: heads?,
        input_len: data.input_len(),
    })
}

/// Predict `x.rows() x horizon` raw forecasts; no clamping happens here.
pub fn predict(model: &TrainedModel, x: &Matrix) -> Result<Matrix, ModelError> {
    if x.cols() != model.input_len {
        return Err(ModelError::Shape {
            expected: model.input_len,
            got: x.cols(),
        });
    }
    let horizon = model.horizon();
    let mut out = Matrix::zeros(x.rows(), horizon);
    for i in 0..x.rows() {
        let row = x.row(i);
        for (j, head) in model.heads.iter().enumerate() {
            out.set(i, j, head.predict_one(row));
        }
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use crate::data::{build_supervised, Market, MarketSeries, SupervisedSet};

    /// Small supervised set from an arbitrary price sequence.
    pub fn supervised_from(prices: &[f64], input_len: usize) -> SupervisedSet {
        let start: chrono::NaiveDate = "2024-01-01".parse().unwrap();
        let rows = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let day = start + chrono::Days::new((i / 6) as u64);
                (day, (i % 6) as u8, p)
            })
            .collect();
        let series = MarketSeries::new(Market::AfrrPos, rows).unwrap();
        build_supervised(&series, input_len, 6).unwrap()
    }
}
