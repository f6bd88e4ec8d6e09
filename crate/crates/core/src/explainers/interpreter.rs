//! Decision-path decomposition: the prediction is the root mean plus the
//! change in node mean at every split along the instance's path.

use super::{Attribution, Method};
use crate::error::{Error, Result};
use crate::model::{check_instance, Model};
use crate::scalar::Scalar;
use crate::trees::TreeModel;

fn decompose<T: Scalar>(tree: &TreeModel<T>, x: &[T], phi: &mut [T]) -> T {
    let nodes = tree.nodes();
    let mut id = 0;
    while let Some(s) = &nodes[id].split {
        let next = if x[s.feature] <= s.threshold { s.left } else { s.right };
        phi[s.feature] += nodes[next].value() - nodes[id].value();
        id = next;
    }
    nodes[0].value()
}

pub fn tree_interpreter<T: Scalar, M: Model<T> + ?Sized>(model: &M, x: &[T], instance_id: usize) -> Result<Attribution<T>> {
    let trees = model.trees().ok_or(Error::NotTreeModel("Tree Interpreter"))?;
    let m = model.n_features();
    check_instance(m, x)?;
    let mut phi = vec![T::zero(); m];
    let mut base = T::zero();
    for t in trees {
        base += decompose(t, x, &mut phi);
    }
    let k = T::from_count(trees.len());
    phi.iter_mut().for_each(|p| *p /= k);
    Ok(Attribution::new(instance_id, Method::Ti, phi, base / k, model.predict(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate, BoolFunction, SyntheticSpec};
    use crate::trees::{fit_forest, fit_tree, ForestParams, Node, TreeParams};

    #[test]
    fn single_leaf_returns_training_mean() {
        let t = TreeModel::from_nodes(vec![Node::<f64> { id: 0, class_counts: [3, 1], gini: 0.375, split: None }], 2, 0)
            .unwrap();
        let a = tree_interpreter(&t, &[0.0, 0.0], 0).unwrap();
        assert_eq!(a.values, vec![0.0, 0.0]);
        assert_eq!(a.base_value, 0.25);
    }

    #[test]
    fn depth_one_not_tree() {
        let d = generate::<f64>(&SyntheticSpec::new(BoolFunction::Not, 0.5, 0.0, 500, 3)).unwrap();
        let t = fit_tree(&d, &TreeParams { max_depth: 1, ..Default::default() }, 0).unwrap();
        let prior = t.training_prior()[1];
        for i in 0..d.len() {
            let a = tree_interpreter(&t, d.row(i), i).unwrap();
            assert_eq!(a.values[1], 0.0);
            assert!((a.values[0] - (t.predict(d.row(i)) - prior)).abs() < 1e-15);
        }
    }

    #[test]
    fn telescoping_identity() {
        let d = generate::<f64>(&SyntheticSpec::new(BoolFunction::Xor, 0.1, 0.5, 500, 3)).unwrap();
        let f = fit_forest(&d, &ForestParams { n_trees: 7, max_depth: 5, ..Default::default() }, 1).unwrap();
        for i in 0..d.len() {
            let a = tree_interpreter(&f, d.row(i), i).unwrap();
            assert!(a.efficiency_gap().abs() < 1e-12);
        }
    }
}
