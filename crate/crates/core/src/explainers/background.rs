use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundOrigin {
    TrainingSample,
    KMeans,
    Explicit,
}

/// Reference rows supplying values for absent features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Background<T> {
    rows: Matrix<T>,
    origin: BackgroundOrigin,
}

impl<T: Scalar> Background<T> {
    pub fn explicit(rows: Matrix<T>) -> Result<Self> {
        Self::with_origin(rows, BackgroundOrigin::Explicit)
    }

    fn with_origin(rows: Matrix<T>, origin: BackgroundOrigin) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("background needs at least one row".into()));
        }
        if let Some(p) = rows.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(p));
        }
        Ok(Self { rows, origin })
    }

    /// `size` rows drawn uniformly without replacement (all rows if fewer).
    pub fn sample(data: &Matrix<T>, size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("background size must be at least 1".into()));
        }
        let n = data.nrows();
        let mut idx = if size >= n { (0..n).collect() } else { sample(&mut seed::rng(seed), n, size).into_vec() };
        idx.sort_unstable();
        Self::with_origin(data.select_rows(&idx), BackgroundOrigin::TrainingSample)
    }

    /// Lloyd's k-means centroids as a compact background.
    pub fn kmeans(data: &Matrix<T>, k: usize, seed: u64, iterations: usize) -> Result<Self> {
        let n = data.nrows();
        if k == 0 || n == 0 {
            return Err(Error::InvalidArgument("k-means needs k >= 1 and data".into()));
        }
        let k = k.min(n);
        let m = data.ncols();
        let mut rng = seed::rng(seed);
        let mut centroids: Vec<Vec<T>> = sample(&mut rng, n, k).into_iter().map(|i| data.row(i).to_vec()).collect();
        let dist = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>();
        let mut assign = vec![0usize; n];
        for _ in 0..iterations {
            for (i, a) in assign.iter_mut().enumerate() {
                let row = data.row(i);
                let mut best = 0;
                for c in 1..k {
                    if dist(row, &centroids[c]) < dist(row, &centroids[best]) {
                        best = c;
                    }
                }
                *a = best;
            }
            let mut sums = vec![vec![T::zero(); m]; k];
            let mut counts = vec![0usize; k];
            for (i, &c) in assign.iter().enumerate() {
                counts[c] += 1;
                for (s, &v) in sums[c].iter_mut().zip(data.row(i)) {
                    *s += v;
                }
            }
            for c in 0..k {
                if counts[c] == 0 {
                    centroids[c] = data.row(rng.random_range(0..n)).to_vec();
                } else {
                    centroids[c] = sums[c].iter().map(|&s| s / T::from_count(counts[c])).collect();
                }
            }
        }
        Self::with_origin(Matrix::from_rows(&centroids)?, BackgroundOrigin::KMeans)
    }

    pub fn rows(&self) -> &Matrix<T> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    pub fn origin(&self) -> BackgroundOrigin {
        self.origin
    }

    pub fn means(&self) -> Vec<T> {
        (0..self.n_features()).map(|j| crate::scalar::mean(&self.rows.column(j))).collect()
    }
}
