use serde::{Deserialize, Serialize};

use super::agreement::ranking;
use crate::error::{Error, Result};
use crate::model::{check_instance, Model};
use crate::scalar::Scalar;

/// Outcome of re-predicting one instance with only its top-k attributed
/// features kept (the rest set to background means), for k = 1..M.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactnessCurve {
    pub order: Vec<usize>,
    /// `matched[k-1]`: masked label equals the full-model label.
    pub matched: Vec<bool>,
    /// `|f(masked_k) - f(x)|` for each k.
    pub distance: Vec<f64>,
}

pub fn compactness<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    x: &[T],
    values: &[T],
    means: &[T],
) -> Result<CompactnessCurve> {
    let m = model.n_features();
    check_instance(m, x)?;
    if values.len() != m || means.len() != m {
        return Err(Error::Dimension { expected: m, got: values.len().min(means.len()) });
    }
    let magnitudes: Vec<f64> = values.iter().map(|v| v.abs().as_f64()).collect();
    let order = ranking(&magnitudes);
    let full = model.predict(x);
    let full_label = full > T::lit(0.5);
    let mut masked = means.to_vec();
    let mut matched = Vec::with_capacity(m);
    let mut distance = Vec::with_capacity(m);
    for &f in &order {
        masked[f] = x[f];
        let p = model.predict(&masked);
        matched.push((p > T::lit(0.5)) == full_label);
        distance.push((p - full).abs().as_f64());
    }
    Ok(CompactnessCurve { order, matched, distance })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactnessSummary {
    /// Fraction of instances matched when keeping k features, k = 1..M.
    pub fidelity: Vec<f64>,
    /// Smallest k whose fidelity reaches the threshold.
    pub k_needed: usize,
    /// Fidelity with five features kept (all features when M < 5).
    pub accuracy_at_5: f64,
    /// Mean prediction distance with only the top feature kept.
    pub distance_top1: f64,
}

pub fn summarize_compactness(curves: &[CompactnessCurve], threshold: f64) -> Result<CompactnessSummary> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!("compactness threshold {threshold} outside (0, 1]")));
    }
    let Some(first) = curves.first() else {
        return Err(Error::InvalidArgument("no compactness curves to summarize".into()));
    };
    let m = first.matched.len();
    if curves.iter().any(|c| c.matched.len() != m) {
        return Err(Error::InvalidArgument("compactness curves of different lengths".into()));
    }
    let n = curves.len() as f64;
    let fidelity: Vec<f64> =
        (0..m).map(|k| curves.iter().filter(|c| c.matched[k]).count() as f64 / n).collect();
    let k_needed = fidelity.iter().position(|&f| f >= threshold).map_or(m, |k| k + 1);
    let accuracy_at_5 = fidelity[m.min(5) - 1];
    let distance_top1 = curves.iter().map(|c| c.distance[0]).sum::<f64>() / n;
    Ok(CompactnessSummary { fidelity, k_needed, accuracy_at_5, distance_top1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;

    #[test]
    fn single_relevant_feature() {
        let f = FnModel::new(3, |x: &[f64]| if x[1] > 0.0 { 0.9 } else { 0.1 });
        let c = compactness(&f, &[-3.0, 1.0, 2.0], &[0.0, 0.4, 0.01], &[0.0, -1.0, 0.0]).unwrap();
        assert_eq!(c.order, vec![1, 2, 0]);
        assert_eq!(c.matched, vec![true, true, true]);
        let s = summarize_compactness(&[c], 0.9).unwrap();
        assert_eq!(s.k_needed, 1);
        assert_eq!(s.accuracy_at_5, 1.0);
    }

    #[test]
    fn full_reconstruction_at_m() {
        let f = FnModel::new(2, |x: &[f64]| if (x[0] > 0.0) != (x[1] > 0.0) { 1.0 } else { 0.0 });
        let c = compactness(&f, &[1.0, -1.0], &[0.1, 0.2], &[1.0, 1.0]).unwrap();
        assert_eq!(c.order, vec![1, 0]);
        assert_eq!(c.matched, vec![true, true]);
        let c2 = compactness(&f, &[1.0, 1.0], &[0.1, 0.2], &[-1.0, -1.0]).unwrap();
        assert_eq!(c2.matched, vec![false, true]);
        assert_eq!(*c2.distance.last().unwrap(), 0.0);
        let s = summarize_compactness(&[c, c2], 0.9).unwrap();
        assert_eq!(s.fidelity, vec![0.5, 1.0]);
        assert_eq!(s.k_needed, 2);
        assert_eq!(s.distance_top1, 0.5);
        assert!(summarize_compactness(&[], 0.9).is_err());
    }
}
