//! Kernel SHAP: Shapley values as the solution of a weighted least-squares
//! problem over coalitions, with efficiency imposed as a hard constraint.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng as _;

use super::exact::MAX_EXACT_FEATURES;
use super::ridge::weighted_ridge;
use super::value::{shapley_kernel_weight, CoalitionValue};
use super::{Attribution, Background, ExplainerConfig, Method};
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::model::{check_instance, Model};
use crate::scalar::Scalar;
use crate::seed::Rng;

/// Widest feature set coalitions can be encoded for.
pub const MAX_KERNEL_FEATURES: usize = 128;

/// Coalitions (as bitmasks, excluding the empty and full sets) with weights.
fn coalitions(m: usize, cfg: &ExplainerConfig, rng: &mut Rng) -> Result<Vec<(u128, f64)>> {
    let all = if m <= MAX_EXACT_FEATURES { Some((1usize << m) - 2) } else { None };
    let enumerate = cfg.full_enumeration || all.is_some_and(|n| n <= cfg.coalition_samples);
    if enumerate {
        if m > MAX_EXACT_FEATURES {
            return Err(Error::EnumerationBound { features: m, bound: MAX_EXACT_FEATURES });
        }
        return Ok((1..(1u128 << m) - 1)
            .map(|mask| (mask, shapley_kernel_weight(m, mask.count_ones() as usize)))
            .collect());
    }
    if cfg.coalition_samples < m + 2 {
        return Err(Error::InvalidArgument(format!(
            "Kernel SHAP needs at least M + 2 = {} coalition samples, got {}",
            m + 2,
            cfg.coalition_samples
        )));
    }
    // sizes drawn with probability proportional to their total kernel mass
    let mass: Vec<f64> = (1..m).map(|s| 1.0 / (s as f64 * (m - s) as f64)).collect();
    let total: f64 = mass.iter().sum();
    let full = if m == 128 { u128::MAX } else { (1u128 << m) - 1 };
    let mut counts: BTreeMap<u128, f64> = BTreeMap::new();
    let draws = cfg.coalition_samples.div_ceil(2);
    for _ in 0..draws {
        let mut u = rng.random::<f64>() * total;
        let mut s = m - 1;
        for (k, w) in mass.iter().enumerate() {
            if u < *w {
                s = k + 1;
                break;
            }
            u -= w;
        }
        let mask = sample(rng, m, s).into_iter().fold(0u128, |acc, j| acc | 1 << j);
        // paired with its complement
        *counts.entry(mask).or_default() += 1.0;
        *counts.entry(full ^ mask).or_default() += 1.0;
    }
    let n = 2.0 * draws as f64;
    Ok(counts.into_iter().map(|(mask, c)| (mask, c / n)).collect())
}

pub fn kernel_shap<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    x: &[T],
    background: &Background<T>,
    cfg: &ExplainerConfig,
    rng: &mut Rng,
    instance_id: usize,
) -> Result<Attribution<T>> {
    cfg.validate()?;
    let m = model.n_features();
    check_instance(m, x)?;
    check_instance(m, background.rows().row(0))?;
    if m > MAX_KERNEL_FEATURES {
        return Err(Error::EnumerationBound { features: m, bound: MAX_KERNEL_FEATURES });
    }
    let mut v = CoalitionValue::new(model, x, background);
    let base = v.base();
    let fx = model.predict(x);
    let delta = fx - base;
    if m == 1 {
        return Ok(Attribution::new(instance_id, Method::Kshap, vec![delta], base, fx));
    }

    let coalitions = coalitions(m, cfg, rng)?;
    let last = m - 1;
    let mut design = Vec::with_capacity(coalitions.len() * last);
    let mut targets = Vec::with_capacity(coalitions.len());
    let mut weights = Vec::with_capacity(coalitions.len());
    for &(mask, w) in &coalitions {
        let z_last = if mask >> last & 1 == 1 { T::one() } else { T::zero() };
        for j in 0..last {
            let zj = if mask >> j & 1 == 1 { T::one() } else { T::zero() };
            design.push(zj - z_last);
        }
        targets.push(v.value_mask(mask) - base - z_last * delta);
        weights.push(T::lit(w));
    }
    let design = Matrix::new(coalitions.len(), last, design)?;
    let fit = weighted_ridge(&design, &targets, &weights, T::zero(), false)?;
    let mut phi = fit.coef;
    let rest: T = phi.iter().copied().sum();
    phi.push(delta - rest);
    let mut out = Attribution::new(instance_id, Method::Kshap, phi, base, fx);
    out.flags.regularized = fit.regularized;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainers::exact_shapley;
    use crate::model::FnModel;
    use crate::seed;

    fn bg(rows: &[Vec<f64>]) -> Background<f64> {
        Background::explicit(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn full_enumeration_matches_exact() {
        let f = FnModel::new(3, |x: &[f64]| (x[0] * x[1]).sin() + x[2] * x[2] * x[0]);
        let b = bg(&[vec![0.1, -0.3, 0.7], vec![1.0, 2.0, -1.0], vec![0.0, 0.5, 0.5]]);
        let x = [0.9, -1.2, 0.4];
        let cfg = ExplainerConfig { full_enumeration: true, ..Default::default() };
        let k = kernel_shap(&f, &x, &b, &cfg, &mut seed::rng(0), 0).unwrap();
        let e = exact_shapley(&f, &x, &b, 0).unwrap();
        for (a, b) in k.values.iter().zip(&e.values) {
            assert!((a - b).abs() < 1e-10, "{:?} vs {:?}", k.values, e.values);
        }
        assert!(k.efficiency_gap().abs() < 1e-12);
    }

    #[test]
    fn constant_model() {
        let f = FnModel::new(4, |_: &[f64]| 0.3);
        let b = bg(&[vec![0.0; 4], vec![1.0; 4]]);
        let cfg = ExplainerConfig { coalition_samples: 10, ..Default::default() };
        let k = kernel_shap(&f, &[5.0; 4], &b, &cfg, &mut seed::rng(1), 0).unwrap();
        assert!(k.values.iter().all(|v| v.abs() < 1e-12), "{:?}", k.values);
    }

    #[test]
    fn sampled_coalitions_on_wide_additive_model() {
        let m = 20;
        let f = FnModel::new(m, |x: &[f64]| x.iter().enumerate().map(|(j, v)| j as f64 * v).sum());
        let b = bg(&[vec![0.0; 20]]);
        let cfg = ExplainerConfig { coalition_samples: 400, ..Default::default() };
        let k = kernel_shap(&f, &[1.0; 20], &b, &cfg, &mut seed::rng(2), 0).unwrap();
        for (j, v) in k.values.iter().enumerate() {
            assert!((v - j as f64).abs() < 1e-8, "{j}: {v}");
        }
    }

    #[test]
    fn too_few_samples() {
        let f = FnModel::new(20, |_: &[f64]| 0.0);
        let b = bg(&[vec![0.0; 20]]);
        let cfg = ExplainerConfig { coalition_samples: 21, ..Default::default() };
        assert!(kernel_shap(&f, &[0.0; 20], &b, &cfg, &mut seed::rng(0), 0).is_err());
    }

    #[test]
    fn single_feature() {
        let f = FnModel::new(1, |x: &[f64]| 2.0 * x[0]);
        let k = kernel_shap(&f, &[3.0], &bg(&[vec![1.0]]), &ExplainerConfig::default(), &mut seed::rng(0), 0).unwrap();
        assert_eq!(k.values, vec![4.0]);
    }
}
