use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, TreeModel, TreeParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features drawn per split; `None` means `ceil(sqrt(M))`.
    #[serde(default)]
    pub feature_subsample: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 2, min_samples_split: 2, feature_subsample: None, bootstrap: true }
    }
}

impl ForestParams {
    pub fn resolved_subsample(&self, n_features: usize) -> usize {
        self.feature_subsample
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1))
    }
}

/// Bagged collection of CART trees; the prediction is the mean tree output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel<T> {
    trees: Vec<TreeModel<T>>,
    tree_seeds: Vec<u64>,
    feature_subsample: usize,
}

impl<T: Scalar> ForestModel<T> {
    pub fn from_trees(trees: Vec<TreeModel<T>>) -> Result<Self> {
        let Some(first) = trees.first() else {
            return Err(Error::ModelFormat("forest needs at least one tree".into()));
        };
        let m = first.n_features();
        if trees.iter().any(|t| t.n_features() != m) {
            return Err(Error::ModelFormat("trees disagree on feature count".into()));
        }
        let n = trees.len();
        Ok(Self { trees, tree_seeds: vec![0; n], feature_subsample: m })
    }

    pub fn tree_seeds(&self) -> &[u64] {
        &self.tree_seeds
    }

    pub fn feature_subsample(&self) -> usize {
        self.feature_subsample
    }
}

impl<T: Scalar> Model<T> for ForestModel<T> {
    fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    fn predict(&self, x: &[T]) -> T {
        self.trees.iter().map(|t| t.predict(x)).sum::<T>() / T::from_count(self.trees.len())
    }

    fn trees(&self) -> Option<&[TreeModel<T>]> {
        Some(&self.trees)
    }
}

pub fn fit_forest<T: Scalar>(ds: &Dataset<T>, params: &ForestParams, seed: u64) -> Result<ForestModel<T>> {
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
    }
    if ds.is_empty() {
        return Err(Error::InvalidDataset("cannot fit a forest on an empty dataset".into()));
    }
    let m = ds.n_features();
    let subsample = params.resolved_subsample(m);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        feature_subsample: Some(subsample),
    };
    let tree_seeds: Vec<u64> = (0..params.n_trees as u64).map(|i| seed::derive(seed, &[i])).collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            if params.bootstrap {
                let mut rng = seed::rng_at(s, &[0]);
                let n = ds.len();
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                fit_tree(&ds.subset(&idx), &tree_params, seed::derive(s, &[1]))
            } else {
                fit_tree(ds, &tree_params, seed::derive(s, &[1]))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel { trees, tree_seeds, feature_subsample: subsample })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::accuracy;
    use crate::synthgen::{generate, BoolFunction, SyntheticSpec};
    use crate::trees::fit_tree;

    fn data(f: BoolFunction, rho: f64, eps: f64, seed: u64) -> Dataset<f64> {
        generate(&SyntheticSpec::new(f, rho, eps, 1000, seed)).unwrap()
    }

    #[test]
    fn degenerate_forest_equals_tree() {
        let d = data(BoolFunction::Xor, 0.1, 0.25, 3);
        let p = ForestParams { n_trees: 1, feature_subsample: Some(2), bootstrap: false, ..Default::default() };
        let forest = fit_forest(&d, &p, 9).unwrap();
        let tree = fit_tree(&d, &TreeParams::default(), 0).unwrap();
        for i in 0..d.len() {
            assert_eq!(forest.predict(d.row(i)), tree.predict(d.row(i)));
        }
    }

    #[test]
    fn not_forest_is_accurate() {
        let d = data(BoolFunction::Not, 0.0, 0.0, 5);
        let f = fit_forest(&d, &ForestParams::default(), 1).unwrap();
        assert!(accuracy(&f, &d) > 0.99);
    }

    #[test]
    fn deterministic_and_order_invariant() {
        let d = data(BoolFunction::Xor, 0.9, 0.0, 6);
        let p = ForestParams { n_trees: 20, ..Default::default() };
        let a = fit_forest(&d, &p, 4).unwrap();
        assert_eq!(a, fit_forest(&d, &p, 4).unwrap());
        let mut rev = a.trees().unwrap().to_vec();
        rev.reverse();
        let b = ForestModel::from_trees(rev).unwrap();
        for i in 0..50 {
            assert!((a.predict(d.row(i)) - b.predict(d.row(i))).abs() < 1e-12);
        }
    }

    #[test]
    fn averaging_two_trees() {
        use crate::trees::Node;
        let leaf = |c: [usize; 2]| {
            TreeModel::from_nodes(vec![Node::<f64> { id: 0, class_counts: c, gini: 0.0, split: None }], 1, 0).unwrap()
        };
        let f = ForestModel::from_trees(vec![leaf([3, 0]), leaf([0, 3])]).unwrap();
        assert_eq!(crate::model::predict_proba(&f, &[0.0]).unwrap(), [0.5, 0.5]);
    }

    #[test]
    fn zero_trees_rejected() {
        let d = data(BoolFunction::Not, 0.0, 0.0, 1);
        assert!(fit_forest(&d, &ForestParams { n_trees: 0, ..Default::default() }, 0).is_err());
        assert!(ForestModel::<f64>::from_trees(vec![]).is_err());
    }
}
