//! Monte-Carlo permutation estimator of interventional Shapley values.

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::value::CoalitionValue;
use super::{Attribution, Background, ExplainerConfig, Method};
use crate::error::{Error, Result};
use crate::model::{check_instance, Model};
use crate::scalar::Scalar;
use crate::seed::Rng;

/// Feature bound for exhaustive permutation enumeration.
pub const MAX_EXHAUSTIVE_FEATURES: usize = 8;

/// Adds each feature's marginal contribution along `order`, starting from
/// background row `r`.
fn walk<T: Scalar, M: Model<T> + ?Sized>(model: &M, x: &[T], r: &[T], order: &[usize], z: &mut [T], out: &mut [T]) {
    z.copy_from_slice(r);
    let mut prev = model.predict(z);
    for &j in order {
        z[j] = x[j];
        let cur = model.predict(z);
        out[j] = cur - prev;
        prev = cur;
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = p.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = p.iter().rposition(|&v| v > p[i]).expect("successor exists");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

/// Each sample draws a uniform permutation and a uniform background row.
/// The residual `f(x) - base - sum(phi)` left by sampling is spread over
/// features in proportion to their estimator variance.
pub fn sampling_shap<T: Scalar, M: Model<T> + ?Sized>(
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
    let base = CoalitionValue::new(model, x, background).base();
    let fx = model.predict(x);
    let rows = background.rows();

    let mut sum = vec![T::zero(); m];
    let mut sum_sq = vec![T::zero(); m];
    let mut step = vec![T::zero(); m];
    let mut z = vec![T::zero(); m];
    let mut order: Vec<usize> = (0..m).collect();
    let mut samples = 0usize;
    let mut record = |step: &[T]| {
        for j in 0..m {
            sum[j] += step[j];
            sum_sq[j] += step[j] * step[j];
        }
    };

    if cfg.exhaustive_permutations {
        if m > MAX_EXHAUSTIVE_FEATURES {
            return Err(Error::EnumerationBound { features: m, bound: MAX_EXHAUSTIVE_FEATURES });
        }
        loop {
            for r in rows.rows() {
                walk(model, x, r, &order, &mut z, &mut step);
                record(&step);
                samples += 1;
            }
            if !next_permutation(&mut order) {
                break;
            }
        }
    } else {
        for _ in 0..cfg.permutation_samples {
            order.shuffle(rng);
            let r = rows.row(rng.random_range(0..rows.nrows()));
            walk(model, x, r, &order, &mut z, &mut step);
            record(&step);
            samples += 1;
        }
    }

    let n = T::from_count(samples);
    let mut phi: Vec<T> = sum.iter().map(|&s| s / n).collect();
    if !cfg.exhaustive_permutations {
        let var: Vec<T> = (0..m).map(|j| (sum_sq[j] / n - phi[j] * phi[j]).max(T::zero())).collect();
        let total_var: T = var.iter().copied().sum();
        let residual = fx - base - phi.iter().copied().sum::<T>();
        for (p, v) in phi.iter_mut().zip(&var) {
            *p += if total_var > T::zero() { residual * *v / total_var } else { residual / T::from_count(m) };
        }
    }
    let out = Attribution::new(instance_id, Method::Sshap, phi, base, fx);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;
    use crate::explainers::exact_shapley;
    use crate::model::FnModel;
    use crate::seed;

    fn bg(rows: &[Vec<f64>]) -> Background<f64> {
        Background::explicit(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn permutations_enumerated() {
        let mut p = vec![0, 1, 2];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 6);
    }

    #[test]
    fn exhaustive_mode_is_exact() {
        let f = FnModel::new(2, |x: &[f64]| if (x[0] > 0.0) ^ (x[1] > 0.0) { 0.9 } else { 0.2 });
        let b = bg(&[vec![-1.0, 1.0], vec![0.5, 0.5], vec![-2.0, -1.0]]);
        let x = [0.3, -0.4];
        let cfg = ExplainerConfig { exhaustive_permutations: true, ..Default::default() };
        let s = sampling_shap(&f, &x, &b, &cfg, &mut seed::rng(0), 0).unwrap();
        let e = exact_shapley(&f, &x, &b, 0).unwrap();
        for (a, b) in s.values.iter().zip(&e.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn null_player_gets_zero() {
        let f = FnModel::new(3, |x: &[f64]| x[0] * x[2]);
        let b = bg(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 1.0]]);
        let cfg = ExplainerConfig { permutation_samples: 50, ..Default::default() };
        let s = sampling_shap(&f, &[2.0, 7.0, 2.0], &b, &cfg, &mut seed::rng(4), 0).unwrap();
        assert_eq!(s.values[1], 0.0);
        assert!(s.efficiency_gap().abs() < 1e-12);
    }

    #[test]
    fn converges_towards_exact() {
        let f = FnModel::new(3, |x: &[f64]| x[0] * x[1] + x[2]);
        let b = bg(&[vec![0.0, 1.0, 2.0], vec![1.0, -1.0, 0.0], vec![2.0, 0.0, 1.0]]);
        let x = [1.5, 2.0, -1.0];
        let e = exact_shapley(&f, &x, &b, 0).unwrap();
        let cfg = ExplainerConfig { permutation_samples: 20_000, ..Default::default() };
        let s = sampling_shap(&f, &x, &b, &cfg, &mut seed::rng(9), 0).unwrap();
        for (a, b) in s.values.iter().zip(&e.values) {
            assert!((a - b).abs() < 0.05, "{:?} {:?}", s.values, e.values);
        }
    }
}
