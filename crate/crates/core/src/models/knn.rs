//! k-nearest-neighbor regression on raw features, Euclidean metric.
//! Equidistant neighbors break ties by lowest training index; with distance
//! weighting, zero-distance neighbors dominate the prediction outright.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "distance")]
    Distance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnHead {
    x: Matrix,
    y: Vec<f64>,
    k: usize,
    weights: WeightKind,
}

pub(crate) fn fit(
    x: &Matrix,
    y: &[f64],
    k: usize,
    weights: WeightKind,
) -> Result<KnnHead, ModelError> {
    if k > x.rows() {
        return Err(ModelError::Spec(format!(
            "KNN: n_neighbors {k} exceeds {} training rows",
            x.rows()
        )));
    }
    Ok(KnnHead {
        x: x.clone(),
        y: y.to_vec(),
        k,
        weights,
    })
}

impl KnnHead {
    pub fn predict_one(&self, query: &[f64]) -> f64 {
        let mut dist2: Vec<(f64, usize)> = self
            .x
            .iter_rows()
            .enumerate()
            .map(|(i, row)| {
                let d2: f64 = row
                    .iter()
                    .zip(query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, i)
            })
            .collect();
        dist2.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let neighbors = &dist2[..self.k];

        match self.weights {
            WeightKind::Uniform => {
                neighbors.iter().map(|&(_, i)| self.y[i]).sum::<f64>() / self.k as f64
            }
            WeightKind::Distance => {
                let exact: Vec<usize> = neighbors
                    .iter()
                    .filter(|(d2, _)| *d2 == 0.0)
                    .map(|&(_, i)| i)
                    .collect();
                if !exact.is_empty() {
                    return exact.iter().map(|&i| self.y[i]).sum::<f64>() / exact.len() as f64;
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for &(d2, i) in neighbors {
                    let w = 1.0 / d2.sqrt();
                    num += w * self.y[i];
                    den += w;
                }
                num / den
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<f64>) {
        let x = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![5.0, 5.0],
        ]);
        (x, vec![1.0, 2.0, 3.0, 40.0])
    }

    #[test]
    fn k1_reproduces_training_targets() {
        let (x, y) = toy();
        let head = fit(&x, &y, 1, WeightKind::Uniform).unwrap();
        for i in 0..x.rows() {
            assert_eq!(head.predict_one(x.row(i)), y[i]);
        }
    }

    #[test]
    fn uniform_average_of_neighbors() {
        let (x, y) = toy();
        let head = fit(&x, &y, 3, WeightKind::Uniform).unwrap();
        // nearest three to the origin are rows 0, 1, 2
        assert_eq!(head.predict_one(&[0.0, 0.0]), (1.0 + 2.0 + 3.0) / 3.0);
    }

    #[test]
    fn distance_weighting_dominated_by_exact_match() {
        let (x, y) = toy();
        let head = fit(&x, &y, 3, WeightKind::Distance).unwrap();
        assert_eq!(head.predict_one(&[5.0, 5.0]), 40.0);
    }

    #[test]
    fn equidistant_ties_break_by_lowest_index() {
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![3.0]]);
        let y = vec![10.0, 20.0, 30.0];
        let head = fit(&x, &y, 1, WeightKind::Uniform).unwrap();
        // 1.0 and -1.0 are both distance 1 from the origin
        assert_eq!(head.predict_one(&[0.0]), 10.0);
    }

    #[test]
    fn permutation_of_training_order_does_not_change_uniform_prediction() {
        let (x, y) = toy();
        let head_a = fit(&x, &y, 2, WeightKind::Uniform).unwrap();
        let perm = [3usize, 1, 0, 2];
        let xp = x.select_rows(&perm);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let head_b = fit(&xp, &yp, 2, WeightKind::Uniform).unwrap();
        for q in [[0.2, 0.1], [4.0, 4.0], [1.0, 1.0]] {
            assert_eq!(head_a.predict_one(&q), head_b.predict_one(&q));
        }
    }

    #[test]
    fn k_larger_than_training_set_is_spec_error() {
        let (x, y) = toy();
        assert!(matches!(
            fit(&x, &y, 5, WeightKind::Uniform),
            Err(ModelError::Spec(_))
        ));
    }
}
