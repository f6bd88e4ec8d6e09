use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::agreement::consistency;
use crate::data::{FeatureStats, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityValue {
    pub value: f64,
    /// No neighbour shared the predicted class; all neighbours were used.
    pub fallback: bool,
}

/// Per-instance stability: mean share distance to the `n_neighbors` nearest
/// explained instances (standardised Euclidean distance) that received the
/// same predicted label. Row `i` of `points` was explained by `shares[i]`.
pub fn stability<T: Scalar>(
    shares: &[Vec<f64>],
    points: &Matrix<T>,
    predicted: &[u8],
    stats: &FeatureStats<T>,
    n_neighbors: usize,
) -> Result<Vec<StabilityValue>> {
    let n = shares.len();
    if points.nrows() != n || predicted.len() != n {
        return Err(Error::Dimension { expected: n, got: points.nrows().min(predicted.len()) });
    }
    if n_neighbors == 0 || n_neighbors + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "{n_neighbors} neighbours requested among {n} explained instances"
        )));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut order: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (stats.standardized_distance(points.row(i), points.row(j)).as_f64(), j))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let nearest = &order[..n_neighbors];
            let same: Vec<usize> =
                nearest.iter().map(|&(_, j)| j).filter(|&j| predicted[j] == predicted[i]).collect();
            let (used, fallback) = if same.is_empty() {
                (nearest.iter().map(|&(_, j)| j).collect(), true)
            } else {
                (same, false)
            };
            let mut total = 0.0;
            for &j in &used {
                total += consistency(&shares[i], &shares[j])?;
            }
            Ok(StabilityValue { value: total / used.len() as f64, fallback })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureKind;

    fn stats(m: &Matrix<f64>) -> FeatureStats<f64> {
        FeatureStats::from_matrix(m, &vec![FeatureKind::Continuous; m.ncols()])
    }

    #[test]
    fn constant_explainer_is_perfectly_stable() {
        let pts = Matrix::from_rows(&(0..20).map(|i| vec![i as f64, (i * i) as f64]).collect::<Vec<_>>()).unwrap();
        let shares = vec![vec![0.3, 0.7]; 20];
        let labels: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let s = stability(&shares, &pts, &labels, &stats(&pts), 10).unwrap();
        assert!(s.iter().all(|v| v.value == 0.0));
    }

    #[test]
    fn duplicated_instance() {
        let pts = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![5.0, 5.0]]).unwrap();
        let shares = vec![vec![0.9, 0.1], vec![0.9, 0.1], vec![0.1, 0.9]];
        let s = stability(&shares, &pts, &[1, 1, 1], &stats(&pts), 1).unwrap();
        assert_eq!(s[0].value, 0.0);
        assert_eq!(s[1].value, 0.0);
        assert!(s[2].value > 1.0);
    }

    #[test]
    fn class_restriction_and_fallback() {
        let pts = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![10.0]]).unwrap();
        let shares = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 0.0]];
        // instance 0: nearest two are 1 (other class) and 2 (same class)
        let s = stability(&shares, &pts, &[0, 1, 0, 0], &stats(&pts), 2).unwrap();
        assert_eq!(s[0], StabilityValue { value: 0.0, fallback: false });
        // instance 1: both nearest neighbours have the other class
        assert!(s[1].fallback);
        assert!((s[1].value - 2f64.sqrt()).abs() < 1e-12);
        assert!(stability(&shares, &pts, &[0, 1, 0, 0], &stats(&pts), 4).is_err());
    }
}
