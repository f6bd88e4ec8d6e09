//! Interventional coalition values and Shapley weights.

use super::Background;
use crate::model::Model;
use crate::scalar::Scalar;

/// `|S|! (M - |S| - 1)! / M!`.
pub fn shapley_weight(m: usize, s: usize) -> f64 {
    debug_assert!(s < m);
    1.0 / (m as f64 * binomial(m - 1, s))
}

pub fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Kernel SHAP weight `(M-1) / (C(M,s) s (M-s))` of a coalition of size `s`.
pub fn shapley_kernel_weight(m: usize, s: usize) -> f64 {
    debug_assert!(s > 0 && s < m);
    (m - 1) as f64 / (binomial(m, s) * s as f64 * (m - s) as f64)
}

/// `v(S) = mean_r f(x_S, r_{not S})` over the background rows.
pub struct CoalitionValue<'a, T: Scalar, M: Model<T> + ?Sized> {
    model: &'a M,
    x: &'a [T],
    background: &'a Background<T>,
    scratch: Vec<T>,
}

impl<'a, T: Scalar, M: Model<T> + ?Sized> CoalitionValue<'a, T, M> {
    pub fn new(model: &'a M, x: &'a [T], background: &'a Background<T>) -> Self {
        Self { model, x, background, scratch: vec![T::zero(); x.len()] }
    }

    pub fn value(&mut self, present: impl Fn(usize) -> bool) -> T {
        let rows = self.background.rows();
        let mut total = T::zero();
        for r in rows.rows() {
            for (j, s) in self.scratch.iter_mut().enumerate() {
                *s = if present(j) { self.x[j] } else { r[j] };
            }
            total += self.model.predict(&self.scratch);
        }
        total / T::from_count(rows.nrows())
    }

    /// Value of the coalition encoded as a bitmask.
    pub fn value_mask(&mut self, mask: u128) -> T {
        self.value(|j| mask >> j & 1 == 1)
    }

    pub fn base(&mut self) -> T {
        self.value(|_| false)
    }
}

/// Wraps a model to explain the log-odds of its class-1 probability.
pub struct LogOddsModel<'a, M: ?Sized> {
    inner: &'a M,
}

impl<'a, M: ?Sized> LogOddsModel<'a, M> {
    pub fn new(inner: &'a M) -> Self {
        Self { inner }
    }
}

/// Probabilities are clipped to `[CLIP, 1 - CLIP]` before the logit.
pub const LOG_ODDS_CLIP: f64 = 1e-6;

impl<T: Scalar, M: Model<T> + ?Sized> Model<T> for LogOddsModel<'_, M> {
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    fn predict(&self, x: &[T]) -> T {
        let c = T::lit(LOG_ODDS_CLIP);
        let p = self.inner.predict(x).max(c).min(T::one() - c);
        (p / (T::one() - p)).ln()
    }

    fn predict_label(&self, x: &[T]) -> u8 {
        self.inner.predict_label(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights() {
        assert!((shapley_weight(3, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((shapley_weight(3, 1) - 1.0 / 6.0).abs() < 1e-15);
        assert!((shapley_kernel_weight(3, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(binomial(5, 2), 10.0);
        for m in 1..10 {
            let total: f64 = (0..m).map(|s| binomial(m - 1, s) * shapley_weight(m, s)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
