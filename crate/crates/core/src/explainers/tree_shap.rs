//! Interventional Tree SHAP.
//!
//! For one (instance, reference) pair, a leaf is reachable under coalition
//! `S` exactly when `S` contains every feature on which the path followed
//! the instance (set `A`) and none of the features on which it followed the
//! reference (set `B`). The leaf value is then a unanimity-style game whose
//! Shapley values are `v (|A|-1)! |B|! / (|A|+|B|)!` for members of `A` and
//! `-v |A|! (|B|-1)! / (|A|+|B|)!` for members of `B`.

use super::{Attribution, Background, Method};
use crate::error::{Error, Result};
use crate::model::{check_instance, Model};
use crate::scalar::Scalar;
use crate::trees::TreeModel;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Unset,
    Instance,
    Reference,
}

struct PairWalk<'a, T> {
    tree: &'a TreeModel<T>,
    x: &'a [T],
    r: &'a [T],
    side: Vec<Side>,
    assigned: Vec<usize>,
    /// `factorial[k] = k!`
    factorial: &'a [f64],
}

impl<T: Scalar> PairWalk<'_, T> {
    fn weight(&self, a: usize, b: usize) -> f64 {
        // a! b! / (a + b + 1)!
        self.factorial[a] * self.factorial[b] / self.factorial[a + b + 1]
    }

    fn visit(&mut self, id: usize, n_inst: usize, n_ref: usize, phi: &mut [T]) {
        let node = &self.tree.nodes()[id];
        let Some(s) = node.split else {
            let v = node.value();
            if n_inst > 0 {
                let w = T::lit(self.weight(n_inst - 1, n_ref));
                for &j in &self.assigned {
                    if self.side[j] == Side::Instance {
                        phi[j] += v * w;
                    }
                }
            }
            if n_ref > 0 {
                let w = T::lit(self.weight(n_inst, n_ref - 1));
                for &j in &self.assigned {
                    if self.side[j] == Side::Reference {
                        phi[j] -= v * w;
                    }
                }
            }
            return;
        };
        let child = |v: T| if v <= s.threshold { s.left } else { s.right };
        let (cx, cr) = (child(self.x[s.feature]), child(self.r[s.feature]));
        match self.side[s.feature] {
            Side::Instance => self.visit(cx, n_inst, n_ref, phi),
            Side::Reference => self.visit(cr, n_inst, n_ref, phi),
            Side::Unset if cx == cr => self.visit(cx, n_inst, n_ref, phi),
            Side::Unset => {
                self.assigned.push(s.feature);
                self.side[s.feature] = Side::Instance;
                self.visit(cx, n_inst + 1, n_ref, phi);
                self.side[s.feature] = Side::Reference;
                self.visit(cr, n_inst, n_ref + 1, phi);
                self.side[s.feature] = Side::Unset;
                self.assigned.pop();
            }
        }
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for k in 1..=n {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

/// Interventional Shapley values of one tree, averaged over the background.
pub fn tree_shap_single<T: Scalar>(tree: &TreeModel<T>, x: &[T], background: &Background<T>) -> (Vec<T>, T) {
    let m = tree.n_features();
    let factorial = factorials(tree.depth() + 2);
    let mut phi = vec![T::zero(); m];
    let mut base = T::zero();
    for r in background.rows().rows() {
        let mut walk =
            PairWalk { tree, x, r, side: vec![Side::Unset; m], assigned: Vec::new(), factorial: &factorial };
        walk.visit(0, 0, 0, &mut phi);
        base += tree.predict(r);
    }
    let n = T::from_count(background.len());
    phi.iter_mut().for_each(|p| *p /= n);
    (phi, base / n)
}

pub fn tree_shap<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    x: &[T],
    background: &Background<T>,
    instance_id: usize,
) -> Result<Attribution<T>> {
    let trees = model.trees().ok_or(Error::NotTreeModel("Tree SHAP"))?;
    let m = model.n_features();
    check_instance(m, x)?;
    check_instance(m, background.rows().row(0))?;
    let mut phi = vec![T::zero(); m];
    let mut base = T::zero();
    for tree in trees {
        let (p, b) = tree_shap_single(tree, x, background);
        phi.iter_mut().zip(p).for_each(|(a, v)| *a += v);
        base += b;
    }
    let k = T::from_count(trees.len());
    phi.iter_mut().for_each(|p| *p /= k);
    Ok(Attribution::new(instance_id, Method::Tshap, phi, base / k, model.predict(x)))
}
