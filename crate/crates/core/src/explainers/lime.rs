//! Tabular LIME: Gaussian perturbations around the training distribution,
//! exponential proximity kernel, weighted ridge surrogate.

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::ridge::weighted_ridge;
use super::{Attribution, ExplainerConfig, Method};
use crate::data::{FeatureKind, FeatureStats, Matrix};
use crate::error::{Error, Result};
use crate::model::{check_instance, Model};
use crate::scalar::Scalar;
use crate::seed::Rng;

fn draw_category<T: Scalar>(cats: &[(T, f64)], rng: &mut Rng) -> Option<T> {
    let mut u = rng.random::<f64>();
    for &(v, p) in cats {
        if u < p {
            return Some(v);
        }
        u -= p;
    }
    cats.last().map(|c| c.0)
}

/// Continuous features enter the surrogate as raw values and are reported
/// as `coef * std`; discrete features enter as the indicator "equals the
/// explained instance" and are reported as the raw coefficient.
pub fn lime<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    x: &[T],
    stats: &FeatureStats<T>,
    cfg: &ExplainerConfig,
    rng: &mut Rng,
    instance_id: usize,
) -> Result<Attribution<T>> {
    cfg.validate()?;
    let m = model.n_features();
    check_instance(m, x)?;
    if stats.means.len() != m {
        return Err(Error::Dimension { expected: m, got: stats.means.len() });
    }
    if cfg.neighborhood_size < m + 2 {
        return Err(Error::InvalidArgument(format!(
            "LIME needs a neighbourhood of at least M + 2 = {} samples",
            m + 2
        )));
    }
    let discrete = |j: usize| stats.kinds.get(j) == Some(&FeatureKind::Discrete) && !stats.categories[j].is_empty();
    let width = T::lit(cfg.kernel_width_for(m));
    let n = cfg.neighborhood_size;

    let mut design = Vec::with_capacity(n * m);
    let mut targets = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut z = x.to_vec();
    for k in 0..n {
        // the instance itself is the first sample
        if k > 0 {
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = if discrete(j) {
                    draw_category(&stats.categories[j], rng).unwrap_or(x[j])
                } else {
                    let e: f64 = rng.sample(StandardNormal);
                    stats.means[j] + stats.stds[j] * T::lit(e)
                };
            }
        }
        let mut d2 = T::zero();
        for j in 0..m {
            if discrete(j) {
                let same = z[j] == x[j];
                design.push(if same { T::one() } else { T::zero() });
                if !same {
                    d2 += T::one();
                }
            } else {
                design.push(z[j]);
                let d = (z[j] - x[j]) / stats.stds[j];
                d2 += d * d;
            }
        }
        targets.push(model.predict(&z));
        weights.push(if width.is_infinite() { T::one() } else { (-d2 / (width * width)).exp() });
    }
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::DegenerateNeighborhood("all LIME kernel weights are zero".into()));
    }
    let design = Matrix::new(n, m, design)?;
    let fit = weighted_ridge(&design, &targets, &weights, T::lit(cfg.ridge_lambda), true)?;
    let values = fit
        .coef
        .iter()
        .enumerate()
        .map(|(j, &c)| if discrete(j) { c } else { c * stats.stds[j] })
        .collect();
    let mut out = Attribution::new(instance_id, Method::Lime, values, fit.intercept, model.predict(x));
    out.flags.regularized = fit.regularized;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;
    use crate::seed;

    fn stats(m: usize) -> FeatureStats<f64> {
        FeatureStats {
            means: vec![0.5; m],
            stds: vec![2.0; m],
            kinds: vec![FeatureKind::Continuous; m],
            categories: vec![Vec::new(); m],
        }
    }

    #[test]
    fn recovers_linear_weights() {
        let w = [0.7, -1.3, 0.2];
        let f = FnModel::new(3, move |x: &[f64]| 0.1 + w[0] * x[0] + w[1] * x[1] + w[2] * x[2]);
        let st = stats(3);
        let a = lime(&f, &[1.0, 0.0, -1.0], &st, &ExplainerConfig::default(), &mut seed::rng(3), 0).unwrap();
        for j in 0..3 {
            let coef = a.values[j] / st.stds[j];
            assert!(((coef - w[j]) / w[j]).abs() < 0.05, "{j}: {coef}");
        }
    }

    #[test]
    fn constant_model_has_zero_coefficients() {
        let f = FnModel::new(2, |_: &[f64]| 0.42);
        let a = lime(&f, &[0.0, 0.0], &stats(2), &ExplainerConfig::default(), &mut seed::rng(1), 0).unwrap();
        assert!(a.values.iter().all(|v| v.abs() < 1e-8), "{:?}", a.values);
        assert!((a.base_value - 0.42).abs() < 1e-8);
    }

    #[test]
    fn infinite_width_is_unweighted() {
        let f = FnModel::new(2, |x: &[f64]| (x[0] * x[1]).tanh());
        let x = [0.3, -0.2];
        let wide = ExplainerConfig { kernel_width: Some(1e6), ..Default::default() };
        let flat = ExplainerConfig { kernel_width: Some(f64::INFINITY), ..Default::default() };
        let a = lime(&f, &x, &stats(2), &wide, &mut seed::rng(5), 0).unwrap();
        let b = lime(&f, &x, &stats(2), &flat, &mut seed::rng(5), 0).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn discrete_features_use_indicators() {
        let mut st = stats(2);
        st.kinds[1] = FeatureKind::Discrete;
        st.categories[1] = vec![(0.0, 0.5), (1.0, 0.5)];
        let f = FnModel::new(2, |x: &[f64]| if x[1] == 1.0 { 0.9 } else { 0.1 });
        let a = lime(&f, &[0.0, 1.0], &st, &ExplainerConfig { ridge_lambda: 0.0, ..Default::default() }, &mut seed::rng(2), 0)
            .unwrap();
        assert!((a.values[1] - 0.8).abs() < 1e-9, "{:?}", a.values);
    }

    #[test]
    fn neighbourhood_too_small() {
        let f = FnModel::new(3, |_: &[f64]| 0.0);
        let cfg = ExplainerConfig { neighborhood_size: 4, ..Default::default() };
        assert!(lime(&f, &[0.0; 3], &stats(3), &cfg, &mut seed::rng(0), 0).is_err());
    }
}
