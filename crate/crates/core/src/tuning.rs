//! Grid search with k-fold cross-validation.
//!
//! Folds are contiguous and time-ordered (no shuffling): the data is a
//! daily time series and shuffled folds would leak adjacent-day structure
//! across the split. Scoring flattens the validation predictions to slot
//! level, matching how the metrics are defined.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::SupervisedSet;
use crate::evaluation;
use crate::models::{self, ModelKind, ModelSpec, ParamValue};

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("cannot make {k} folds from {n} samples")]
    Fold { n: usize, k: usize },
    #[error("every grid configuration failed; first failure: {0}")]
    Search(String),
    #[error("empty grid")]
    EmptyGrid,
}

/// Scoring id. All three are minimized; revenue is negated for that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scoring {
    #[serde(rename = "MAE")]
    Mae,
    #[serde(rename = "MAPE")]
    Mape,
    #[serde(rename = "NEG_REVENUE")]
    NegRevenue,
}

impl Scoring {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scoring::Mae => "MAE",
            Scoring::Mape => "MAPE",
            Scoring::NegRevenue => "NEG_REVENUE",
        }
    }

    pub fn parse(s: &str) -> Option<Scoring> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "MAE" => Some(Scoring::Mae),
            "MAPE" => Some(Scoring::Mape),
            "NEG_REVENUE" | "NEGREVENUE" => Some(Scoring::NegRevenue),
            _ => None,
        }
    }

    /// Score flattened slot-level predictions; lower is better.
    pub fn score(&self, y: &[f64], y_hat: &[f64]) -> Result<f64, String> {
        match self {
            Scoring::Mae => evaluation::mae(y, y_hat).map_err(|e| e.to_string()),
            Scoring::Mape => evaluation::mape(y, y_hat)
                .map(|(m, _)| m)
                .map_err(|e| e.to_string()),
            Scoring::NegRevenue => {
                // bids are floored at zero exactly as the backtester would
                let bids: Vec<f64> = y_hat.iter().map(|v| v.max(0.0)).collect();
                evaluation::revenue(y, &bids)
                    .map(|r| -r)
                    .map_err(|e| e.to_string())
            }
        }
    }
}

impl std::fmt::Display for Scoring {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Contiguous, time-ordered folds; sizes differ by at most one (earlier
/// folds take the remainder). No RNG is involved.
pub fn kfold_indices(n: usize, k: usize) -> Result<Vec<Vec<usize>>, TuneError> {
    if k < 2 || n < k {
        return Err(TuneError::Fold { n, k });
    }
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0usize;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push((start..start + size).collect());
        start += size;
    }
    Ok(folds)
}

/// Hyperparameter axes for one model kind; configurations enumerate the
/// Cartesian product with the last axis varying fastest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamGrid {
    pub kind: ModelKind,
    pub axes: Vec<(String, Vec<ParamValue>)>,
}

impl ParamGrid {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            axes: Vec::new(),
        }
    }

    pub fn axis(mut self, name: &str, values: Vec<ParamValue>) -> Self {
        self.axes.push((name.to_string(), values));
        self
    }

    /// The default search spaces, seeded verbatim from the study design.
    pub fn defaults(kind: ModelKind) -> Self {
        use ParamValue::{Float, Int, Null, Str};
        let grid = Self::new(kind);
        match kind {
            ModelKind::Svr => grid
                .axis("C", vec![Float(0.1), Float(1.0), Float(10.0)])
                .axis("epsilon", vec![Float(0.1), Float(0.2), Float(0.5)]),
            ModelKind::GbLevelwise => grid
                .axis("n_estimators", vec![Int(100), Int(200)])
                .axis("learning_rate", vec![Float(0.01), Float(0.1)])
                .axis("max_depth", vec![Int(3), Int(5)]),
            ModelKind::GbSecondOrder => grid
                .axis("n_estimators", vec![Int(100), Int(200)])
                .axis("learning_rate", vec![Float(0.01), Float(0.1)])
                .axis("max_depth", vec![Int(3), Int(5)]),
            ModelKind::GbLeafwise => grid
                .axis("n_estimators", vec![Int(100), Int(200)])
                .axis("learning_rate", vec![Float(0.01), Float(0.1)])
                .axis("num_leaves", vec![Int(31), Int(50)]),
            ModelKind::RandomForest => grid
                .axis("n_estimators", vec![Int(100), Int(200)])
                .axis("max_depth", vec![Null, Int(10), Int(20)]),
            ModelKind::Cart => grid
                .axis("max_depth", vec![Null, Int(10), Int(20)])
                .axis("min_samples_split", vec![Int(2), Int(10)]),
            ModelKind::Knn => grid
                .axis("n_neighbors", vec![Int(3), Int(5), Int(7)])
                .axis(
                    "weights",
                    vec![Str("uniform".into()), Str("distance".into())],
                ),
            ModelKind::Ridge => grid.axis("alpha", vec![Float(0.1), Float(1.0), Float(10.0)]),
            ModelKind::Lasso => grid.axis("alpha", vec![Float(0.1), Float(1.0), Float(10.0)]),
            ModelKind::ElasticNet => grid
                .axis("alpha", vec![Float(0.1), Float(1.0), Float(10.0)])
                .axis("l1_ratio", vec![Float(0.1), Float(0.5), Float(0.9)]),
        }
    }

    /// Grid holding exactly one configuration: the spec's own parameters.
    pub fn single(spec: &ModelSpec) -> Self {
        let mut grid = Self::new(spec.kind);
        for (name, value) in &spec.params {
            grid.axes.push((name.clone(), vec![value.clone()]));
        }
        grid
    }

    pub fn n_configs(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    /// All specs in grid order (first axis slowest, last fastest).
    pub fn configs(&self, seed: u64) -> Vec<ModelSpec> {
        let total = self.n_configs();
        let mut out = Vec::with_capacity(total);
        for mut flat in 0..total {
            let mut spec = ModelSpec::new(self.kind).with_seed(seed);
            for (name, values) in self.axes.iter().rev() {
                let pick = flat % values.len();
                flat /= values.len();
                spec.params.insert(name.clone(), values[pick].clone());
            }
            out.push(spec);
        }
        out
    }
}

/// One grid configuration's cross-validation outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvEntry {
    pub spec: ModelSpec,
    pub fold_scores: Vec<f64>,
    pub mean_score: Option<f64>,
    pub error: Option<String>,
}

/// Full audit trail of a grid search plus the winning spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvResult {
    pub scoring: Scoring,
    pub k: usize,
    pub entries: Vec<CvEntry>,
    pub best_index: usize,
}

impl CvResult {
    pub fn best_spec(&self) -> &ModelSpec {
        &self.entries[self.best_index].spec
    }

    pub fn best_mean_score(&self) -> f64 {
        self.entries[self.best_index].mean_score.unwrap()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("CvResult serialization cannot fail")
    }
}

fn evaluate_config(
    spec: &ModelSpec,
    data: &SupervisedSet,
    folds: &[Vec<usize>],
    scoring: Scoring,
) -> CvEntry {
    let n = data.n_samples();
    let mut fold_scores = Vec::with_capacity(folds.len());
    for fold in folds {
        let train_idx: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
        let train = data.subset(&train_idx);
        let val = data.subset(fold);
        let outcome = models::fit(spec, &train)
            .and_then(|model| models::predict(&model, &val.x))
            .map_err(|e| e.to_string())
            .and_then(|preds| scoring.score(val.y.data(), preds.data()));
        match outcome {
            Ok(score) if score.is_finite() => fold_scores.push(score),
            Ok(score) => {
                return CvEntry {
                    spec: spec.clone(),
                    fold_scores,
                    mean_score: None,
                    error: Some(format!("non-finite fold score {score}")),
                }
            }
            Err(e) => {
                return CvEntry {
                    spec: spec.clone(),
                    fold_scores,
                    mean_score: None,
                    error: Some(e),
                }
            }
        }
    }
    let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    CvEntry {
        spec: spec.clone(),
        fold_scores,
        mean_score: Some(mean),
        error: None,
    }
}

/// Fit every configuration on k-1 folds, score the held-out fold, and pick
/// the configuration with the lowest mean score. Ties break toward the
/// earliest grid position; failed configurations are excluded.
pub fn grid_search(
    grid: &ParamGrid,
    data: &SupervisedSet,
    k: usize,
    scoring: Scoring,
    seed: u64,
) -> Result<CvResult, TuneError> {
    if grid.n_configs() == 0 {
        return Err(TuneError::EmptyGrid);
    }
    let folds = kfold_indices(data.n_samples(), k)?;
    let configs = grid.configs(seed);
    let entries: Vec<CvEntry> = configs
        .par_iter()
        .map(|spec| evaluate_config(spec, data, &folds, scoring))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, entry) in entries.iter().enumerate() {
        if let Some(mean) = entry.mean_score {
            if best.is_none_or(|(_, b)| mean < b) {
                best = Some((i, mean));
            }
        }
    }
    match best {
        Some((best_index, _)) => Ok(CvResult {
            scoring,
            k,
            entries,
            best_index,
        }),
        None => Err(TuneError::Search(
            entries
                .first()
                .and_then(|e| e.error.clone())
                .unwrap_or_else(|| "no configurations".into()),
        )),
    }
}
