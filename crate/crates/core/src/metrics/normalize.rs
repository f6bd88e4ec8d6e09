use serde::{Deserialize, Serialize};

use crate::explainers::{Attribution, Method};
use crate::scalar::Scalar;

/// Absolute attribution shares summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedAttribution {
    pub instance_id: usize,
    pub method: Method,
    pub shares: Vec<f64>,
    /// Set when every source value was zero and uniform shares were used.
    pub degenerate: bool,
}

/// `|v_i| / sum |v_j|`, or uniform shares (flagged) for an all-zero input.
pub fn normalize_values(values: &[f64]) -> (Vec<f64>, bool) {
    let m = values.len();
    if m == 0 {
        return (Vec::new(), true);
    }
    let total: f64 = values.iter().map(|v| v.abs()).sum();
    if total == 0.0 || !total.is_finite() {
        return (vec![1.0 / m as f64; m], true);
    }
    (values.iter().map(|v| v.abs() / total).collect(), false)
}

pub fn normalize<T: Scalar>(a: &Attribution<T>) -> NormalizedAttribution {
    let values: Vec<f64> = a.values.iter().map(|v| v.as_f64()).collect();
    let (shares, degenerate) = normalize_values(&values);
    NormalizedAttribution { instance_id: a.instance_id, method: a.method, shares, degenerate }
}
