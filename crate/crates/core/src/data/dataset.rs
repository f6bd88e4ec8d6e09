use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Discrete,
}

/// Binary-labelled tabular data. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    features: Matrix<T>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    feature_kinds: Vec<FeatureKind>,
    provenance: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: Matrix<T>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        feature_kinds: Vec<FeatureKind>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        let m = features.ncols();
        if feature_names.len() != m || feature_kinds.len() != m {
            return Err(Error::InvalidDataset(format!(
                "{m} features but {} names and {} kinds",
                feature_names.len(),
                feature_kinds.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::InvalidDataset(format!("label {} at row {i} is not 0 or 1", labels[i])));
        }
        if let Some(p) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(p));
        }
        Ok(Self { features, labels, feature_names, feature_kinds, provenance: provenance.into() })
    }

    /// Dataset with continuous features named `x1..xM`.
    pub fn from_continuous(features: Matrix<T>, labels: Vec<u8>, provenance: impl Into<String>) -> Result<Self> {
        let m = features.ncols();
        let names = (1..=m).map(|j| format!("x{j}")).collect();
        Self::new(features, labels, names, vec![FeatureKind::Continuous; m], provenance)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            feature_kinds: self.feature_kinds.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.len() as f64
    }

    /// Writes the data-core CSV format: optional `#` comment lines, a header
    /// with the feature names followed by `label`, one row per instance.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        let io = |e| Error::io("<csv writer>", e);
        for c in comments {
            writeln!(out, "# {c}").map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("label");
        w.write_record(&header).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].to_string());
            w.write_record(&rec).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        }
        w.flush().map_err(io)
    }

    pub fn save_csv(&self, path: &Path, comments: &[String]) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), comments)
    }
}

/// Per-feature summary of a training set, used to standardise distances and
/// to draw perturbations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats<T> {
    pub means: Vec<T>,
    /// Population standard deviations; zero-variance features report 1.
    pub stds: Vec<T>,
    pub kinds: Vec<FeatureKind>,
    /// For discrete features, the observed values with their frequencies.
    pub categories: Vec<Vec<(T, f64)>>,
}

impl<T: Scalar> FeatureStats<T> {
    pub fn from_matrix(x: &Matrix<T>, kinds: &[FeatureKind]) -> Self {
        let m = x.ncols();
        let mut means = Vec::with_capacity(m);
        let mut stds = Vec::with_capacity(m);
        let mut categories = Vec::with_capacity(m);
        for j in 0..m {
            let col = x.column(j);
            let mu = crate::scalar::mean(&col);
            let sd = crate::scalar::variance(&col).sqrt();
            means.push(mu);
            stds.push(if sd > T::zero() { sd } else { T::one() });
            let cats = if kinds.get(j) == Some(&FeatureKind::Discrete) {
                let mut sorted = col.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
                let mut out: Vec<(T, f64)> = Vec::new();
                for v in sorted {
                    match out.last_mut() {
                        Some((last, c)) if *last == v => *c += 1.0,
                        _ => out.push((v, 1.0)),
                    }
                }
                let n = col.len().max(1) as f64;
                out.into_iter().map(|(v, c)| (v, c / n)).collect()
            } else {
                Vec::new()
            };
            categories.push(cats);
        }
        Self { means, stds, kinds: kinds.to_vec(), categories }
    }

    pub fn from_dataset(ds: &Dataset<T>) -> Self {
        Self::from_matrix(ds.features(), ds.feature_kinds())
    }

    /// Euclidean distance after dividing each coordinate by its std.
    pub fn standardized_distance(&self, a: &[T], b: &[T]) -> T {
        a.iter()
            .zip(b)
            .zip(&self.stds)
            .map(|((&x, &y), &s)| {
                let d = (x - y) / s;
                d * d
            })
            .sum::<T>()
            .sqrt()
    }
}
