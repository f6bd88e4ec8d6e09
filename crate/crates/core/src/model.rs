//! The model interface explainers and metrics consume.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trees::TreeModel;

/// Binary classifier exposing the probability of class 1.
pub trait Model<T: Scalar>: Sync {
    fn n_features(&self) -> usize;

    /// Probability of class 1. Inputs are assumed validated.
    fn predict(&self, x: &[T]) -> T;

    /// The trees behind the model, when it is tree-based.
    fn trees(&self) -> Option<&[TreeModel<T>]> {
        None
    }

    fn predict_label(&self, x: &[T]) -> u8 {
        u8::from(self.predict(x) > T::lit(0.5))
    }
}

impl<T: Scalar, M: Model<T> + ?Sized> Model<T> for &M {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn predict(&self, x: &[T]) -> T {
        (**self).predict(x)
    }
    fn trees(&self) -> Option<&[TreeModel<T>]> {
        (**self).trees()
    }
}

/// Adapts a closure into a [`Model`].
pub struct FnModel<F> {
    n_features: usize,
    f: F,
}

impl<F> FnModel<F> {
    pub fn new(n_features: usize, f: F) -> Self {
        Self { n_features, f }
    }
}

impl<T: Scalar, F: Fn(&[T]) -> T + Sync> Model<T> for FnModel<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn predict(&self, x: &[T]) -> T {
        (self.f)(x)
    }
}

/// Checks an instance against the model's arity and for finiteness.
pub fn check_instance<T: Scalar>(n_features: usize, x: &[T]) -> Result<()> {
    if x.len() != n_features {
        return Err(Error::Dimension { expected: n_features, got: x.len() });
    }
    if let Some(p) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(p));
    }
    Ok(())
}

/// Class probabilities `(P(y=0), P(y=1))`.
pub fn predict_proba<T: Scalar, M: Model<T> + ?Sized>(model: &M, x: &[T]) -> Result<[T; 2]> {
    check_instance(model.n_features(), x)?;
    let p = model.predict(x);
    Ok([T::one() - p, p])
}

/// Fraction of rows whose thresholded prediction equals the label.
pub fn accuracy<T: Scalar, M: Model<T> + ?Sized>(model: &M, ds: &crate::data::Dataset<T>) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let hits = (0..ds.len()).filter(|&i| model.predict_label(ds.row(i)) == ds.labels()[i]).count();
    hits as f64 / ds.len() as f64
}
