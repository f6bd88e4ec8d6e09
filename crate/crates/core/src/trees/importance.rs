use super::tree::{gini, TreeModel};
use crate::scalar::Scalar;

/// Mean decrease in impurity per feature, unnormalised.
pub fn raw_gini_importance<T: Scalar>(tree: &TreeModel<T>) -> Vec<f64> {
    let m = crate::model::Model::n_features(tree);
    let mut out = vec![0.0; m];
    let total = tree.root().samples() as f64;
    if total == 0.0 {
        return out;
    }
    for node in tree.nodes() {
        if let Some(s) = &node.split {
            let (l, r) = (&tree.nodes()[s.left], &tree.nodes()[s.right]);
            let n = node.samples() as f64;
            let child = (l.samples() as f64 * gini(l.class_counts) + r.samples() as f64 * gini(r.class_counts)) / n;
            out[s.feature] += n / total * (node.gini - child);
        }
    }
    out
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.into_iter().map(|x| x / s).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Gini importance normalised to sum to one (all zeros without splits).
/// Forests average the per-tree normalised vectors and renormalise.
pub fn gini_importance<T: Scalar>(trees: &[TreeModel<T>]) -> Vec<f64> {
    let Some(first) = trees.first() else {
        return Vec::new();
    };
    let m = crate::model::Model::n_features(first);
    let mut acc = vec![0.0; m];
    for t in trees {
        for (a, v) in acc.iter_mut().zip(normalized(raw_gini_importance(t))) {
            *a += v;
        }
    }
    normalized(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate, BoolFunction, SyntheticSpec};
    use crate::trees::{fit_forest, fit_tree, ForestParams, TreeParams};

    #[test]
    fn not_tree_uses_only_first_feature() {
        for rho in [0.0, 0.1, 0.9] {
            let d = generate::<f64>(&SyntheticSpec::new(BoolFunction::Not, rho, 0.0, 1000, 2)).unwrap();
            let t = fit_tree(&d, &TreeParams::default(), 0).unwrap();
            assert_eq!(gini_importance(std::slice::from_ref(&t)), vec![1.0, 0.0]);
        }
    }

    #[test]
    fn single_leaf_has_zero_importance() {
        let d = generate::<f64>(&SyntheticSpec::new(BoolFunction::Not, 0.0, 0.0, 100, 2)).unwrap();
        let t = fit_tree(&d, &TreeParams { max_depth: 0, ..Default::default() }, 0).unwrap();
        assert_eq!(gini_importance(std::slice::from_ref(&t)), vec![0.0, 0.0]);
    }

    #[test]
    fn normalised_importances_sum_to_one() {
        let d = generate::<f64>(&SyntheticSpec::new(BoolFunction::Xor, 0.1, 0.25, 1000, 2)).unwrap();
        let f = fit_forest(&d, &ForestParams { n_trees: 10, ..Default::default() }, 0).unwrap();
        let imp = gini_importance(crate::model::Model::trees(&f).unwrap());
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(imp.iter().all(|&v| v >= 0.0));
    }
}
