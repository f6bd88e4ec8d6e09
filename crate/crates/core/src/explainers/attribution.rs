use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Kshap,
    Sshap,
    Tshap,
    #[serde(rename = "TI")]
    Ti,
    #[serde(rename = "LIME")]
    Lime,
    #[serde(rename = "LSurro")]
    LSurro,
    Exact,
}

impl Method {
    /// The six compared explainers, in reporting order.
    pub const ALL: [Method; 6] = [Method::Kshap, Method::Sshap, Method::Tshap, Method::Ti, Method::Lime, Method::LSurro];

    pub fn name(self) -> &'static str {
        match self {
            Method::Kshap => "Kshap",
            Method::Sshap => "Sshap",
            Method::Tshap => "Tshap",
            Method::Ti => "TI",
            Method::Lime => "LIME",
            Method::LSurro => "LSurro",
            Method::Exact => "Exact",
        }
    }

    /// Methods whose output satisfies `base + sum(phi) = f(x)`.
    pub fn is_additive(self) -> bool {
        matches!(self, Method::Kshap | Method::Sshap | Method::Tshap | Method::Ti | Method::Exact)
    }

    pub fn is_shapley(self) -> bool {
        matches!(self, Method::Kshap | Method::Sshap | Method::Tshap | Method::Exact)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = Method::ALL.into_iter().chain([Method::Exact]);
        for m in all {
            if m.name().eq_ignore_ascii_case(s) {
                return Ok(m);
            }
        }
        Err(Error::InvalidArgument(format!(
            "unknown method `{s}` (expected one of Kshap, Sshap, Tshap, TI, LIME, LSurro, Exact)"
        )))
    }
}

/// Side information an explainer attaches to its output.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributionFlags {
    /// A ridge penalty was added to rescue a singular system.
    pub regularized: bool,
    /// Efficiency could not be enforced exactly.
    pub incomplete: bool,
    /// R^2 of a local surrogate on its own neighbourhood.
    pub fidelity: Option<f64>,
}

/// Signed per-feature contributions for one explained instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution<T> {
    pub instance_id: usize,
    pub method: Method,
    pub values: Vec<T>,
    pub base_value: T,
    pub target_output: T,
    #[serde(default)]
    pub flags: AttributionFlags,
}

impl<T: Scalar> Attribution<T> {
    pub fn new(instance_id: usize, method: Method, values: Vec<T>, base_value: T, target_output: T) -> Self {
        Self { instance_id, method, values, base_value, target_output, flags: AttributionFlags::default() }
    }

    /// `base + sum(phi) - f(x)`.
    pub fn efficiency_gap(&self) -> T {
        self.base_value + self.values.iter().copied().sum::<T>() - self.target_output
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite()) && self.base_value.is_finite() && self.target_output.is_finite()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputScale {
    #[default]
    Probability,
    /// Logit of the class-1 probability, clipped away from 0 and 1.
    LogOdds,
}

/// Per-method knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainerConfig {
    /// Coalitions drawn by Kernel SHAP.
    pub coalition_samples: usize,
    /// Enumerate every coalition instead of sampling.
    pub full_enumeration: bool,
    /// (permutation, background row) draws for Sampling SHAP.
    pub permutation_samples: usize,
    /// Enumerate every permutation against every background row.
    pub exhaustive_permutations: bool,
    pub neighborhood_size: usize,
    /// LIME kernel width; `None` means `0.75 * sqrt(M)`.
    pub kernel_width: Option<f64>,
    pub neighbor_count: usize,
    pub ridge_lambda: f64,
    pub output: OutputScale,
    pub seed: u64,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            coalition_samples: 2048,
            full_enumeration: false,
            permutation_samples: 1000,
            exhaustive_permutations: false,
            neighborhood_size: 5000,
            kernel_width: None,
            neighbor_count: 50,
            ridge_lambda: 1.0,
            output: OutputScale::Probability,
            seed: 0,
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("coalition_samples", self.coalition_samples),
            ("permutation_samples", self.permutation_samples),
            ("neighborhood_size", self.neighborhood_size),
            ("neighbor_count", self.neighbor_count),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if let Some(w) = self.kernel_width {
            if !(w > 0.0) {
                return Err(Error::InvalidArgument(format!("kernel_width {w} must be positive")));
            }
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("ridge_lambda {} must be non-negative", self.ridge_lambda)));
        }
        Ok(())
    }

    pub fn kernel_width_for(&self, n_features: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (n_features as f64).sqrt())
    }
}
