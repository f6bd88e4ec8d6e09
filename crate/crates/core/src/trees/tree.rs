//! CART classification trees grown greedily on Gini impurity.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::seed::{self, Rng};

/// Smallest impurity decrease that justifies a split.
const MIN_DECREASE: f64 = 1e-12;

pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = counts[1] as f64 / n;
    2.0 * p * (1.0 - p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split<T> {
    pub feature: usize,
    pub threshold: T,
    pub left: usize,
    pub right: usize,
}

/// One node of the arena. Instances with `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node<T> {
    pub id: usize,
    pub class_counts: [usize; 2],
    pub gini: f64,
    #[serde(default = "Option::default", skip_serializing_if = "Option::is_none")]
    pub split: Option<Split<T>>,
}

impl<T: Scalar> Node<T> {
    pub fn samples(&self) -> usize {
        self.class_counts[0] + self.class_counts[1]
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    /// Fraction of class-1 training samples reaching the node.
    pub fn value(&self) -> T {
        let n = self.samples();
        if n == 0 {
            return T::zero();
        }
        T::from_count(self.class_counts[1]) / T::from_count(n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features examined per split; `None` examines all of them.
    #[serde(default)]
    pub feature_subsample: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 2, min_samples_split: 2, feature_subsample: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel<T> {
    nodes: Vec<Node<T>>,
    max_depth: usize,
    n_features: usize,
}

impl<T: Scalar> TreeModel<T> {
    /// Builds a tree from an explicit node arena rooted at index 0.
    pub fn from_nodes(nodes: Vec<Node<T>>, n_features: usize, max_depth: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::ModelFormat("tree has no nodes".into()));
        }
        let tree = Self { nodes, max_depth, n_features };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ModelFormat(m));
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            if seen[id] {
                return bad(format!("node {id} reachable twice"));
            }
            seen[id] = true;
            let node = &self.nodes[id];
            if node.id != id {
                return bad(format!("node at position {id} carries id {}", node.id));
            }
            if !(0.0..=0.5 + 1e-12).contains(&node.gini) {
                return bad(format!("node {id} gini {} outside [0, 0.5]", node.gini));
            }
            if let Some(s) = &node.split {
                if depth >= self.max_depth {
                    return bad(format!("node {id} splits below max depth {}", self.max_depth));
                }
                if s.feature >= self.n_features {
                    return bad(format!("node {id} splits on feature {} of {}", s.feature, self.n_features));
                }
                if s.left >= self.nodes.len() || s.right >= self.nodes.len() {
                    return bad(format!("node {id} has a dangling child"));
                }
                let (l, r) = (&self.nodes[s.left], &self.nodes[s.right]);
                if l.class_counts[0] + r.class_counts[0] != node.class_counts[0]
                    || l.class_counts[1] + r.class_counts[1] != node.class_counts[1]
                {
                    return bad(format!("children of node {id} do not partition its samples"));
                }
                stack.push((s.left, depth + 1));
                stack.push((s.right, depth + 1));
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("unreachable nodes in arena".into());
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn root(&self) -> &Node<T> {
        &self.nodes[0]
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn depth(&self) -> usize {
        fn go<T: Scalar>(t: &TreeModel<T>, id: usize) -> usize {
            match &t.nodes[id].split {
                None => 0,
                Some(s) => 1 + go(t, s.left).max(go(t, s.right)),
            }
        }
        go(self, 0)
    }

    /// Class proportions of the training sample at the root.
    pub fn training_prior(&self) -> [f64; 2] {
        let c = self.root().class_counts;
        let n = (c[0] + c[1]).max(1) as f64;
        [c[0] as f64 / n, c[1] as f64 / n]
    }

    /// Node ids visited from the root to the leaf reached by `x`.
    pub fn decision_path(&self, x: &[T]) -> Vec<usize> {
        let mut path = vec![0];
        let mut id = 0;
        while let Some(s) = &self.nodes[id].split {
            id = if x[s.feature] <= s.threshold { s.left } else { s.right };
            path.push(id);
        }
        path
    }

    pub fn leaf(&self, x: &[T]) -> &Node<T> {
        let mut id = 0;
        while let Some(s) = &self.nodes[id].split {
            id = if x[s.feature] <= s.threshold { s.left } else { s.right };
        }
        &self.nodes[id]
    }
}

impl<T: Scalar> Model<T> for TreeModel<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, x: &[T]) -> T {
        self.leaf(x).value()
    }

    fn trees(&self) -> Option<&[TreeModel<T>]> {
        Some(std::slice::from_ref(self))
    }
}

struct Grower<'a, T> {
    ds: &'a Dataset<T>,
    params: TreeParams,
    rng: Rng,
    nodes: Vec<Node<T>>,
}

struct Candidate<T> {
    feature: usize,
    threshold: T,
    decrease: f64,
}

impl<T: Scalar> Grower<'_, T> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let ones = idx.iter().filter(|&&i| self.ds.labels()[i] == 1).count();
        [idx.len() - ones, ones]
    }

    fn best_split(&mut self, idx: &[usize], counts: [usize; 2]) -> Option<Candidate<T>> {
        let m = self.ds.n_features();
        let features: Vec<usize> = match self.params.feature_subsample {
            Some(k) if k < m => {
                let mut f = sample(&mut self.rng, m, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..m).collect(),
        };
        let n = idx.len() as f64;
        let parent = gini(counts);
        let mut best: Option<Candidate<T>> = None;
        let mut column: Vec<(T, u8)> = Vec::with_capacity(idx.len());
        for f in features {
            column.clear();
            column.extend(idx.iter().map(|&i| (self.ds.row(i)[f], self.ds.labels()[i])));
            column.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let mut left = [0usize; 2];
            for k in 0..column.len() - 1 {
                left[column[k].1 as usize] += 1;
                let (lo, hi) = (column[k].0, column[k + 1].0);
                if lo == hi {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let nl = (k + 1) as f64;
                let weighted = (nl * gini(left) + (n - nl) * gini(right)) / n;
                let decrease = parent - weighted;
                if best.as_ref().map_or(true, |b| decrease > b.decrease + MIN_DECREASE) {
                    let mid = (lo + hi) / T::lit(2.0);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Candidate { feature: f, threshold, decrease });
                }
            }
        }
        best.filter(|b| b.decrease > MIN_DECREASE)
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node { id, class_counts: counts, gini: gini(counts), split: None });
        let splittable = depth < self.params.max_depth
            && idx.len() >= self.params.min_samples_split
            && counts[0] > 0
            && counts[1] > 0;
        if !splittable {
            return id;
        }
        if let Some(c) = self.best_split(&idx, counts) {
            let (l, r): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| self.ds.row(i)[c.feature] <= c.threshold);
            let left = self.grow(l, depth + 1);
            let right = self.grow(r, depth + 1);
            self.nodes[id].split = Some(Split { feature: c.feature, threshold: c.threshold, left, right });
        }
        id
    }
}

/// Greedy CART. Ties between equally good splits go to the lowest feature
/// index, then the lowest threshold.
pub fn fit_tree<T: Scalar>(ds: &Dataset<T>, params: &TreeParams, seed: u64) -> Result<TreeModel<T>> {
    if ds.is_empty() {
        return Err(Error::InvalidDataset("cannot fit a tree on an empty dataset".into()));
    }
    if params.min_samples_split < 2 {
        return Err(Error::InvalidArgument("min_samples_split must be at least 2".into()));
    }
    if params.feature_subsample == Some(0) {
        return Err(Error::InvalidArgument("feature_subsample must be at least 1".into()));
    }
    let mut grower = Grower { ds, params: *params, rng: seed::rng(seed), nodes: Vec::new() };
    grower.grow((0..ds.len()).collect(), 0);
    Ok(TreeModel { nodes: grower.nodes, max_depth: params.max_depth, n_features: ds.n_features() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;
    use crate::model::{accuracy, predict_proba};
    use crate::synthgen::{generate, BoolFunction, SyntheticSpec};

    fn ds(rows: &[[f64; 2]], y: &[u8]) -> Dataset<f64> {
        Dataset::from_continuous(Matrix::from_rows(rows).unwrap(), y.to_vec(), "t").unwrap()
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini([5, 5]), 0.5);
        assert_eq!(gini([0, 7]), 0.0);
        assert!((gini([1, 3]) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn constant_labels_give_single_leaf() {
        let d = ds(&[[0.0, 1.0], [1.0, 2.0], [2.0, 0.0]], &[1, 1, 1]);
        let t = fit_tree(&d, &TreeParams::default(), 0).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict(&[5.0, 5.0]), 1.0);
    }

    #[test]
    fn single_leaf_predicts_prior() {
        let d = ds(&[[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]], &[0, 1, 1, 1]);
        let t = fit_tree(&d, &TreeParams::default(), 0).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(predict_proba(&t, &[3.0, -1.0]).unwrap(), [0.25, 0.75]);
        assert_eq!(t.training_prior(), [0.25, 0.75]);
    }

    #[test]
    fn midpoint_thresholds_and_tie_break() {
        // both features separate the labels perfectly; feature 0 wins
        let d = ds(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]], &[0, 0, 1, 1]);
        let t = fit_tree(&d, &TreeParams { max_depth: 1, ..Default::default() }, 0).unwrap();
        let s = t.root().split.unwrap();
        assert_eq!((s.feature, s.threshold), (0, 1.5));
    }

    #[test]
    fn xor_depth_two_is_nearly_perfect() {
        // the greedy root split lands near, not exactly on, the XOR boundary
        let spec = SyntheticSpec::new(BoolFunction::Xor, 0.0, 0.0, 1000, 1);
        let data = generate::<f64>(&spec).unwrap();
        let t = fit_tree(&data, &TreeParams::default(), 0).unwrap();
        assert!(accuracy(&t, &data) >= 0.98);
        assert!(t.depth() <= 2);
    }

    #[test]
    fn not_splits_once_on_first_feature() {
        let spec = SyntheticSpec::new(BoolFunction::Not, 0.0, 0.0, 1000, 1);
        let data = generate::<f64>(&spec).unwrap();
        let t = fit_tree(&data, &TreeParams::default(), 0).unwrap();
        let s = t.root().split.unwrap();
        assert_eq!(s.feature, 0);
        assert!(t.nodes()[s.left].gini == 0.0 && t.nodes()[s.right].gini == 0.0);
        assert!(t.nodes()[s.left].is_leaf() && t.nodes()[s.right].is_leaf());
    }

    #[test]
    fn depth_and_invariants_respected() {
        let spec = SyntheticSpec::new(BoolFunction::Xor, 0.1, 0.5, 1000, 4);
        let data = generate::<f64>(&spec).unwrap();
        for depth in [0, 1, 3, 6] {
            let t = fit_tree(&data, &TreeParams { max_depth: depth, ..Default::default() }, 0).unwrap();
            assert!(t.depth() <= depth);
            assert!(TreeModel::from_nodes(t.nodes().to_vec(), 2, depth).is_ok());
            for node in t.nodes() {
                assert!((0.0..=0.5).contains(&node.gini));
                if let Some(s) = node.split {
                    let (l, r) = (&t.nodes()[s.left], &t.nodes()[s.right]);
                    assert_eq!(l.samples() + r.samples(), node.samples());
                    let child = (l.samples() as f64 * l.gini + r.samples() as f64 * r.gini) / node.samples() as f64;
                    assert!(node.gini - child > 0.0);
                }
            }
        }
    }

    #[test]
    fn fully_grown_tree_is_one_hot_on_training_data() {
        let spec = SyntheticSpec::new(BoolFunction::Xor, 0.5, 0.25, 300, 8);
        let data = generate::<f64>(&spec).unwrap();
        let t = fit_tree(&data, &TreeParams { max_depth: 64, ..Default::default() }, 0).unwrap();
        for i in 0..data.len() {
            let p = t.predict(data.row(i));
            assert!(p == 0.0 || p == 1.0);
            assert_eq!(p as u8, data.labels()[i]);
        }
    }

    #[test]
    fn errors() {
        let empty = Dataset::<f64>::from_continuous(Matrix::new(0, 2, vec![]).unwrap(), vec![], "e").unwrap();
        assert!(fit_tree(&empty, &TreeParams::default(), 0).is_err());
        let d = ds(&[[0.0, 1.0]], &[0]);
        let t = fit_tree(&d, &TreeParams::default(), 0).unwrap();
        assert!(predict_proba(&t, &[f64::NAN, 0.0]).is_err());
        assert!(predict_proba(&t, &[0.0]).is_err());
        assert!(fit_tree(&d, &TreeParams { min_samples_split: 1, ..Default::default() }, 0).is_err());
    }

    #[test]
    fn f32_trees_work() {
        let spec = SyntheticSpec::new(BoolFunction::Xor, 0.0, 0.0, 500, 1);
        let data = generate::<f32>(&spec).unwrap();
        let t = fit_tree(&data, &TreeParams::default(), 0).unwrap();
        assert!(accuracy(&t, &data) >= 0.98);
    }

    #[test]
    fn from_nodes_rejects_bad_arenas() {
        let leaf = |id, c: [usize; 2]| Node::<f64> { id, class_counts: c, gini: gini(c), split: None };
        let mut root = leaf(0, [2, 2]);
        root.split = Some(Split { feature: 0, threshold: 0.0, left: 1, right: 2 });
        assert!(TreeModel::from_nodes(vec![root.clone(), leaf(1, [2, 0]), leaf(2, [0, 2])], 1, 1).is_ok());
        assert!(TreeModel::from_nodes(vec![root.clone(), leaf(1, [2, 0]), leaf(2, [0, 1])], 1, 1).is_err());
        assert!(TreeModel::from_nodes(vec![root.clone(), leaf(1, [2, 0]), leaf(2, [0, 2])], 1, 0).is_err());
        assert!(TreeModel::from_nodes(vec![root, leaf(1, [2, 0]), leaf(2, [0, 2])], 0, 1).is_err());
    }
}
