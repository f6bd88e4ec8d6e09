use super::value::{shapley_weight, CoalitionValue};
use super::{Attribution, Background, Method};
use crate::error::{Error, Result};
use crate::model::{check_instance, Model};
use crate::scalar::Scalar;

/// Largest feature count brute-force enumeration accepts.
pub const MAX_EXACT_FEATURES: usize = 15;

/// Shapley values by enumerating all `2^M` coalitions of the interventional
/// value function. Used as the reference for every estimator.
pub fn exact_shapley<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    x: &[T],
    background: &Background<T>,
    instance_id: usize,
) -> Result<Attribution<T>> {
    let m = model.n_features();
    check_instance(m, x)?;
    check_instance(m, background.rows().row(0))?;
    if m > MAX_EXACT_FEATURES {
        return Err(Error::EnumerationBound { features: m, bound: MAX_EXACT_FEATURES });
    }
    let mut v = CoalitionValue::new(model, x, background);
    let values: Vec<T> = (0..1u128 << m).map(|mask| v.value_mask(mask)).collect();
    let weights: Vec<T> = (0..m).map(|s| T::lit(shapley_weight(m, s))).collect();
    let mut phi = vec![T::zero(); m];
    for mask in 0..1usize << m {
        let size = mask.count_ones() as usize;
        if size == m {
            continue;
        }
        for (i, p) in phi.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                *p += weights[size] * (values[mask | 1 << i] - values[mask]);
            }
        }
    }
    Ok(Attribution::new(instance_id, Method::Exact, phi, values[0], model.predict(x)))
}
