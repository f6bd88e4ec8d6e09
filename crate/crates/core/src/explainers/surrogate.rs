//! Local surrogate fitted on the nearest real training instances.

use super::ridge::weighted_ridge;
use super::{Attribution, ExplainerConfig, Method};
use crate::data::{FeatureStats, Matrix};
use crate::error::{Error, Result};
use crate::model::{check_instance, Model};
use crate::scalar::Scalar;

/// Unweighted ridge regression of the model output on the `neighbor_count`
/// training rows closest to `x` in standardised Euclidean distance.
/// Attributions are the standardised coefficients; the neighbourhood R^2 is
/// stored in the flags.
pub fn local_surrogate<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    x: &[T],
    training: &Matrix<T>,
    stats: &FeatureStats<T>,
    cfg: &ExplainerConfig,
    instance_id: usize,
) -> Result<Attribution<T>> {
    cfg.validate()?;
    let m = model.n_features();
    check_instance(m, x)?;
    if training.ncols() != m || stats.stds.len() != m {
        return Err(Error::Dimension { expected: m, got: training.ncols() });
    }
    let k = cfg.neighbor_count;
    if k > training.nrows() {
        return Err(Error::InvalidArgument(format!(
            "neighbor_count {k} exceeds the {} training instances",
            training.nrows()
        )));
    }
    if k < m + 1 {
        return Err(Error::InvalidArgument(format!("neighbor_count {k} < M + 1 = {}: underdetermined", m + 1)));
    }
    let mut order: Vec<(T, usize)> =
        training.rows().enumerate().map(|(i, r)| (stats.standardized_distance(x, r), i)).collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
    let idx: Vec<usize> = order[..k].iter().map(|&(_, i)| i).collect();
    let neighbours = training.select_rows(&idx);
    let targets: Vec<T> = neighbours.rows().map(|r| model.predict(r)).collect();
    let fit = weighted_ridge(&neighbours, &targets, &vec![T::one(); k], T::lit(cfg.ridge_lambda), true)?;

    let mean_y = crate::scalar::mean(&targets);
    let (mut ss_res, mut ss_tot) = (T::zero(), T::zero());
    for (r, &y) in neighbours.rows().zip(&targets) {
        let pred = fit.intercept + r.iter().zip(&fit.coef).map(|(&a, &b)| a * b).sum::<T>();
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r2 = if ss_tot > T::zero() { T::one() - ss_res / ss_tot } else if ss_res <= T::epsilon() { T::one() } else { T::zero() };

    let values = fit.coef.iter().zip(&stats.stds).map(|(&c, &s)| c * s).collect();
    let mut out = Attribution::new(instance_id, Method::LSurro, values, fit.intercept, model.predict(x));
    out.flags.regularized = fit.regularized;
    out.flags.fidelity = Some(r2.as_f64());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureKind;
    use crate::model::FnModel;
    use crate::seed;
    use crate::synthgen::{generate, BoolFunction, SyntheticSpec};
    use crate::trees::{fit_tree, TreeParams};
    use rand::Rng as _;

    fn training(n: usize) -> Matrix<f64> {
        let mut rng = seed::rng(8);
        Matrix::from_rows(&(0..n).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-1.0..3.0)]).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn global_neighbourhood_recovers_linear_model() {
        let x = training(300);
        let st = FeatureStats::from_matrix(&x, &[FeatureKind::Continuous; 2]);
        let f = FnModel::new(2, |v: &[f64]| 0.5 + 0.3 * v[0] - 0.8 * v[1]);
        let cfg = ExplainerConfig { neighbor_count: 300, ..Default::default() };
        let a = local_surrogate(&f, &[0.0, 0.0], &x, &st, &cfg, 0).unwrap();
        let c = [a.values[0] / st.stds[0], a.values[1] / st.stds[1]];
        assert!(((c[0] - 0.3) / 0.3).abs() < 0.05 && ((c[1] + 0.8) / 0.8).abs() < 0.05, "{c:?}");
        assert!(a.flags.fidelity.unwrap() > 0.99);
    }

    #[test]
    fn constant_model() {
        let x = training(100);
        let st = FeatureStats::from_matrix(&x, &[FeatureKind::Continuous; 2]);
        let f = FnModel::new(2, |_: &[f64]| 0.7);
        let a = local_surrogate(&f, &[0.0, 0.0], &x, &st, &ExplainerConfig::default(), 0).unwrap();
        assert!(a.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn small_neighbourhood_inside_one_xor_quadrant() {
        let d = generate::<f64>(&SyntheticSpec::new(BoolFunction::Xor, 0.0, 0.0, 1000, 1)).unwrap();
        let t = fit_tree(&d, &TreeParams::default(), 0).unwrap();
        let st = FeatureStats::from_dataset(&d);
        let cfg = ExplainerConfig { neighbor_count: 5, ..Default::default() };
        // deep inside the (+, +) quadrant every neighbour gets the same prediction
        let a = local_surrogate(&t, &[2.0, 3.0], d.features(), &st, &cfg, 0).unwrap();
        assert!(a.values.iter().all(|v| v.abs() < 1e-9), "{:?}", a.values);
    }

    #[test]
    fn neighbour_count_bounds() {
        let x = training(10);
        let st = FeatureStats::from_matrix(&x, &[FeatureKind::Continuous; 2]);
        let f = FnModel::new(2, |_: &[f64]| 0.0);
        let too_many = ExplainerConfig { neighbor_count: 11, ..Default::default() };
        assert!(local_surrogate(&f, &[0.0, 0.0], &x, &st, &too_many, 0).is_err());
        let too_few = ExplainerConfig { neighbor_count: 2, ..Default::default() };
        assert!(local_surrogate(&f, &[0.0, 0.0], &x, &st, &too_few, 0).is_err());
    }
}
