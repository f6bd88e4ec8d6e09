//! Two-feature Gaussian benchmark with XOR / NOT targets, label noise and
//! analytically known feature importances.

use std::fmt;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoolFunction {
    #[serde(rename = "XOR", alias = "xor")]
    Xor,
    #[serde(rename = "NOT", alias = "not")]
    Not,
}

impl BoolFunction {
    pub fn apply(self, b1: bool, b2: bool) -> bool {
        match self {
            BoolFunction::Xor => b1 ^ b2,
            BoolFunction::Not => !b1,
        }
    }

    /// Means used for this function in the default grid.
    pub fn default_mu(self) -> [f64; 2] {
        match self {
            BoolFunction::Xor => [0.0, 1.0],
            BoolFunction::Not => [1.0, 0.0],
        }
    }
}

impl fmt::Display for BoolFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoolFunction::Xor => "XOR",
            BoolFunction::Not => "NOT",
        })
    }
}

/// Recipe for one synthetic dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub function: BoolFunction,
    pub mu: [f64; 2],
    pub rho: f64,
    pub epsilon: f64,
    pub n: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(function: BoolFunction, rho: f64, epsilon: f64, n: usize, seed: u64) -> Self {
        Self { function, mu: function.default_mu(), rho, epsilon, n, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!("rho = {} outside [0, 1]", self.rho)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument(format!("epsilon = {} outside [0, 1]", self.epsilon)));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if !self.mu.iter().all(|m| m.is_finite()) {
            return Err(Error::InvalidArgument("non-finite mean".into()));
        }
        Ok(())
    }

    /// Human-readable identifier, unique within a grid.
    pub fn name(&self) -> String {
        format!("{}_rho{:.2}_eps{:.2}", self.function.to_string().to_lowercase(), self.rho, self.epsilon)
    }

    /// Hex SHA-256 over every field of the recipe.
    pub fn digest(&self) -> String {
        let canonical = format!(
            "{}|{:e}|{:e}|{:e}|{:e}|{}|{}",
            self.function, self.mu[0], self.mu[1], self.rho, self.epsilon, self.n, self.seed
        );
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Draws `n` rows with unit marginal variances and correlation `rho`.
///
/// The second coordinate is built as `mu2 + rho*z1 + sqrt(1-rho^2)*z2`, so
/// `rho = 1` needs no factorisation of the singular covariance.
pub fn sample_features<T: Scalar>(spec: &SyntheticSpec) -> Result<Matrix<T>> {
    spec.validate()?;
    let mut rng = seed::rng_at(spec.seed, &[0]);
    let tail = (1.0 - spec.rho * spec.rho).max(0.0).sqrt();
    let mut data = Vec::with_capacity(2 * spec.n);
    for _ in 0..spec.n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        data.push(T::lit(spec.mu[0] + z1));
        data.push(T::lit(spec.mu[1] + spec.rho * z1 + tail * z2));
    }
    Matrix::new(spec.n, 2, data)
}

/// Binarises each feature at zero and applies the boolean function.
pub fn label<T: Scalar>(features: &Matrix<T>, function: BoolFunction) -> Result<Vec<u8>> {
    if features.ncols() != 2 {
        return Err(Error::Dimension { expected: 2, got: features.ncols() });
    }
    Ok(features
        .rows()
        .map(|r| u8::from(function.apply(r[0] > T::zero(), r[1] > T::zero())))
        .collect())
}

/// Flips each label independently with probability `epsilon`.
pub fn apply_noise(labels: &[u8], epsilon: f64, seed: u64) -> Result<Vec<u8>> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} outside [0, 1]")));
    }
    let mut rng = seed::rng(seed);
    Ok(labels
        .iter()
        .map(|&y| {
            let flip = rng.random::<f64>() < epsilon;
            if flip {
                1 - y
            } else {
                y
            }
        })
        .collect())
}

pub fn generate<T: Scalar>(spec: &SyntheticSpec) -> Result<Dataset<T>> {
    let x = sample_features::<T>(spec)?;
    let clean = label(&x, spec.function)?;
    let y = apply_noise(&clean, spec.epsilon, seed::derive(spec.seed, &[1]))?;
    Dataset::from_continuous(x, y, format!("synthetic:{}:{}", spec.name(), spec.digest()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundTruthMode {
    /// Scale by `epsilon` when `epsilon != 0`.
    #[default]
    PaperLiteral,
    /// Scale by `1 - epsilon`, continuous at `epsilon = 0`.
    SignalScaled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthAttribution {
    pub raw: [f64; 2],
    pub normalized: [f64; 2],
    pub mode: GroundTruthMode,
    /// Set when `raw` is all zero; `normalized` then equals `raw`.
    pub degenerate: bool,
}

pub fn ground_truth(spec: &SyntheticSpec, mode: GroundTruthMode) -> Result<GroundTruthAttribution> {
    spec.validate()?;
    let base = match spec.function {
        BoolFunction::Xor => [0.5, 0.5],
        BoolFunction::Not => [1.0, spec.rho],
    };
    let scale = if spec.epsilon == 0.0 {
        1.0
    } else {
        match mode {
            GroundTruthMode::PaperLiteral => spec.epsilon,
            GroundTruthMode::SignalScaled => 1.0 - spec.epsilon,
        }
    };
    let raw = [base[0] * scale, base[1] * scale];
    let total = raw[0] + raw[1];
    let degenerate = total == 0.0;
    let normalized = if degenerate { raw } else { [raw[0] / total, raw[1] / total] };
    Ok(GroundTruthAttribution { raw, normalized, mode, degenerate })
}

/// Axes of the synthetic grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub functions: Vec<BoolFunction>,
    pub rhos: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub n: usize,
    pub base_seed: u64,
    pub mu_xor: [f64; 2],
    pub mu_not: [f64; 2],
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            functions: vec![BoolFunction::Xor, BoolFunction::Not],
            rhos: vec![0.0, 0.1, 0.9, 1.0],
            epsilons: vec![0.0, 0.25, 0.5],
            n: 1000,
            base_seed: 0,
            mu_xor: BoolFunction::Xor.default_mu(),
            mu_not: BoolFunction::Not.default_mu(),
        }
    }
}

impl GridConfig {
    /// Cross product in (function, epsilon, rho) order; the seed of the
    /// i-th spec is derived from `base_seed` and `i`.
    pub fn enumerate(&self) -> Vec<SyntheticSpec> {
        let mut out = Vec::new();
        for &function in &self.functions {
            for &epsilon in &self.epsilons {
                for &rho in &self.rhos {
                    let mu = match function {
                        BoolFunction::Xor => self.mu_xor,
                        BoolFunction::Not => self.mu_not,
                    };
                    let seed = seed::derive(self.base_seed, &[out.len() as u64]);
                    out.push(SyntheticSpec { function, mu, rho, epsilon, n: self.n, seed });
                }
            }
        }
        out
    }
}

/// The default 24-dataset grid.
pub fn enumerate_grid() -> Vec<SyntheticSpec> {
    GridConfig::default().enumerate()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub name: String,
    pub digest: String,
    pub spec: SyntheticSpec,
}

/// Listing of every generated spec with its digest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridManifest {
    pub version: u32,
    pub entries: Vec<GridEntry>,
}

impl GridManifest {
    pub fn new(specs: &[SyntheticSpec]) -> Self {
        Self {
            version: 1,
            entries: specs.iter().map(|s| GridEntry { name: s.name(), digest: s.digest(), spec: *s }).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(x: &Matrix<f64>) -> f64 {
        let a = x.column(0);
        let b = x.column(1);
        let (ma, mb) = (crate::scalar::mean(&a), crate::scalar::mean(&b));
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn correlation_matches_rho() {
        for (rho, tol) in [(0.0, 0.01), (0.1, 0.01), (0.9, 0.01), (1.0, 1e-9)] {
            let spec = SyntheticSpec::new(BoolFunction::Xor, rho, 0.0, 100_000, 11);
            let r = corr(&sample_features(&spec).unwrap());
            assert!((r - rho).abs() < tol, "rho={rho} r={r}");
        }
    }

    #[test]
    fn uncorrelated_sample() {
        let spec = SyntheticSpec::new(BoolFunction::Not, 0.0, 0.0, 100_000, 3);
        assert!(corr(&sample_features(&spec).unwrap()).abs() < 0.02);
    }

    #[test]
    fn fully_correlated_is_linear() {
        let spec = SyntheticSpec::new(BoolFunction::Not, 1.0, 0.0, 500, 5);
        let x = sample_features::<f64>(&spec).unwrap();
        for r in x.rows() {
            assert!(((r[1] - spec.mu[1]) - (r[0] - spec.mu[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn labels_of_single_points() {
        let x = Matrix::from_rows(&[vec![1.2, -0.3]]).unwrap();
        assert_eq!(label(&x, BoolFunction::Xor).unwrap(), vec![1]);
        assert_eq!(label(&x, BoolFunction::Not).unwrap(), vec![0]);
        assert!(label(&Matrix::from_rows(&[vec![1.0]]).unwrap(), BoolFunction::Xor).is_err());
    }

    #[test]
    fn shifted_mean_creates_imbalance() {
        // P(X1 > 0) = Phi(1) = 0.8413 for X1 ~ N(1, 1)
        let spec = SyntheticSpec::new(BoolFunction::Not, 0.0, 0.0, 100_000, 9);
        let ds = generate::<f64>(&spec).unwrap();
        assert!((ds.positive_rate() - (1.0 - 0.841_344_746)).abs() < 0.01, "{}", ds.positive_rate());
    }

    #[test]
    fn noise_extremes_and_rate() {
        let y: Vec<u8> = (0..10_000).map(|i| (i % 2) as u8).collect();
        assert_eq!(apply_noise(&y, 0.0, 1).unwrap(), y);
        let all = apply_noise(&y, 1.0, 1).unwrap();
        assert!(all.iter().zip(&y).all(|(a, b)| *a == 1 - b));
        let some = apply_noise(&y, 0.25, 1).unwrap();
        let flipped = some.iter().zip(&y).filter(|(a, b)| a != b).count() as f64 / y.len() as f64;
        assert!((flipped - 0.25).abs() < 0.015, "{flipped}");
        assert!(apply_noise(&y, 1.5, 1).is_err());
    }

    #[test]
    fn noiseless_labels_are_a_function_of_features() {
        for spec in enumerate_grid().into_iter().filter(|s| s.epsilon == 0.0) {
            let ds = generate::<f64>(&spec).unwrap();
            assert_eq!(label(ds.features(), spec.function).unwrap(), ds.labels());
        }
    }

    #[test]
    fn not_ignores_second_feature() {
        let spec = SyntheticSpec::new(BoolFunction::Not, 1.0, 0.0, 1000, 2);
        let ds = generate::<f64>(&spec).unwrap();
        for i in 0..ds.len() {
            assert_eq!(ds.labels()[i], u8::from(ds.row(i)[0] <= 0.0));
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = SyntheticSpec::new(BoolFunction::Xor, 0.9, 0.25, 1000, 77);
        assert_eq!(generate::<f64>(&spec).unwrap(), generate::<f64>(&spec).unwrap());
        let other = SyntheticSpec { seed: 78, ..spec };
        assert_ne!(spec.digest(), other.digest());
    }

    #[test]
    fn invalid_specs() {
        assert!(SyntheticSpec::new(BoolFunction::Xor, 1.1, 0.0, 10, 0).validate().is_err());
        assert!(SyntheticSpec::new(BoolFunction::Xor, 0.1, -0.1, 10, 0).validate().is_err());
        assert!(SyntheticSpec::new(BoolFunction::Xor, 0.1, 0.0, 0, 0).validate().is_err());
    }

    #[test]
    fn ground_truth_values() {
        let gt = |f, rho, eps, mode| ground_truth(&SyntheticSpec::new(f, rho, eps, 10, 0), mode).unwrap();
        for rho in [0.0, 0.1, 0.9, 1.0] {
            let g = gt(BoolFunction::Xor, rho, 0.0, GroundTruthMode::PaperLiteral);
            assert_eq!(g.raw, [0.5, 0.5]);
            assert_eq!(g.normalized, [0.5, 0.5]);
        }
        assert_eq!(gt(BoolFunction::Not, 0.9, 0.0, GroundTruthMode::PaperLiteral).raw, [1.0, 0.9]);
        assert_eq!(gt(BoolFunction::Not, 0.5, 0.25, GroundTruthMode::PaperLiteral).raw, [0.25, 0.125]);
        assert_eq!(gt(BoolFunction::Not, 0.5, 0.25, GroundTruthMode::SignalScaled).raw, [0.75, 0.375]);
        assert_eq!(gt(BoolFunction::Xor, 0.5, 0.5, GroundTruthMode::PaperLiteral).raw, [0.25, 0.25]);
        let n = gt(BoolFunction::Not, 0.5, 0.0, GroundTruthMode::PaperLiteral).normalized;
        assert!((n[0] - 2.0 / 3.0).abs() < 1e-15 && (n[0] + n[1] - 1.0).abs() < 1e-15);
        let d = gt(BoolFunction::Xor, 0.0, 1.0, GroundTruthMode::SignalScaled);
        assert!(d.degenerate);
        assert_eq!(d.normalized, [0.0, 0.0]);
    }

    #[test]
    fn default_grid() {
        let grid = enumerate_grid();
        assert_eq!(grid.len(), 24);
        assert!(grid.iter().all(|s| s.n == 1000));
        assert!(grid.iter().any(|s| s.function == BoolFunction::Xor && s.rho == 0.9 && s.epsilon == 0.25));
        assert!(grid.iter().all(|s| s.mu == s.function.default_mu()));
        let mut names: Vec<String> = grid.iter().map(SyntheticSpec::name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 24);
        assert_eq!(GridManifest::new(&grid).entries.len(), 24);
    }
}
