//! Weighted ridge regression through the normal equations.

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Penalty used when an unpenalised system turns out to be singular.
pub const RESCUE_LAMBDA: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeSolution<T> {
    pub intercept: T,
    pub coef: Vec<T>,
    pub lambda: T,
    /// `RESCUE_LAMBDA` had to be applied.
    pub regularized: bool,
}

/// In-place Cholesky solve of the SPD system `a x = b` (`a` is p×p row-major).
fn cholesky_solve<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>, p: usize) -> Option<Vec<T>> {
    let scale = (0..p).map(|i| a[i * p + i].abs()).fold(T::zero(), T::max);
    let tiny = T::epsilon() * T::lit(1e3) * scale.max(T::min_positive_value());
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > tiny) {
            return None;
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * p + k] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in i + 1..p {
            s -= a[k * p + i] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    Some(b)
}

/// Minimises `sum_i w_i (y_i - c - x_i beta)^2 + lambda |beta|^2`. The
/// intercept `c` is fitted only when `intercept` is set and never penalised.
pub fn weighted_ridge<T: Scalar>(
    design: &Matrix<T>,
    targets: &[T],
    weights: &[T],
    lambda: T,
    intercept: bool,
) -> Result<RidgeSolution<T>> {
    let n = design.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("regression needs at least one row".into()));
    }
    if targets.len() != n || weights.len() != n {
        return Err(Error::Dimension { expected: n, got: targets.len().min(weights.len()) });
    }
    if weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
        return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
    }
    if !weights.iter().any(|&w| w > T::zero()) {
        return Err(Error::InvalidArgument("all regression weights are zero".into()));
    }
    if !(lambda >= T::zero()) {
        return Err(Error::InvalidArgument("ridge lambda must be non-negative".into()));
    }
    let m = design.ncols();
    let off = usize::from(intercept);
    let p = m + off;
    let mut a = vec![T::zero(); p * p];
    let mut b = vec![T::zero(); p];
    let mut row = vec![T::one(); p];
    for i in 0..n {
        let w = weights[i];
        if w == T::zero() {
            continue;
        }
        row[off..].copy_from_slice(design.row(i));
        for r in 0..p {
            let wr = w * row[r];
            b[r] += wr * targets[i];
            for c in r..p {
                a[r * p + c] += wr * row[c];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            a[r * p + c] = a[c * p + r];
        }
    }
    let solve = |lam: T| {
        let mut a = a.clone();
        for j in off..p {
            a[j * p + j] += lam;
        }
        cholesky_solve(a, b.clone(), p)
    };
    let (sol, lambda_used, regularized) = match solve(lambda) {
        Some(s) => (s, lambda, false),
        None if lambda == T::zero() => {
            let rescue = T::lit(RESCUE_LAMBDA);
            match solve(rescue) {
                Some(s) => (s, rescue, true),
                None => return Err(Error::Singular),
            }
        }
        None => return Err(Error::Singular),
    };
    Ok(RidgeSolution {
        intercept: if intercept { sol[0] } else { T::zero() },
        coef: sol[off..].to_vec(),
        lambda: lambda_used,
        regularized,
    })
}
