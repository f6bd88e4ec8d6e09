//! Randomised equivalence sweep of the Shapley estimators against
//! brute-force enumeration.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{exact_shapley, kernel_shap, tree_shap, Background, ExplainerConfig};
use crate::data::Matrix;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::seed::{self, Rng};
use crate::trees::{gini, Node, Split, TreeModel};

pub const TREE_SHAP_TOLERANCE: f64 = 1e-9;
pub const KERNEL_SHAP_TOLERANCE: f64 = 1e-6;

/// Coordinates are drawn from a small lattice so that instances and
/// references often fall on the same side of a split.
fn lattice_value(rng: &mut Rng) -> f64 {
    rng.random_range(-4i32..=4) as f64 * 0.5
}

fn grow<T: Scalar>(nodes: &mut Vec<Node<T>>, m: usize, depth: usize, max_depth: usize, rng: &mut Rng) -> usize {
    let id = nodes.len();
    nodes.push(Node { id, class_counts: [0, 0], gini: 0.0, split: None });
    if depth < max_depth && rng.random::<f64>() < 0.8 {
        let feature = rng.random_range(0..m);
        let threshold = T::lit(lattice_value(rng) + 0.25);
        let left = grow(nodes, m, depth + 1, max_depth, rng);
        let right = grow(nodes, m, depth + 1, max_depth, rng);
        let (l, r) = (nodes[left].class_counts, nodes[right].class_counts);
        nodes[id].class_counts = [l[0] + r[0], l[1] + r[1]];
        nodes[id].split = Some(Split { feature, threshold, left, right });
    } else {
        nodes[id].class_counts = [rng.random_range(0..20), rng.random_range(1..20)];
    }
    nodes[id].gini = gini(nodes[id].class_counts);
    id
}

/// Random tree of depth at most `max_depth` over `m` features.
pub fn random_tree<T: Scalar>(m: usize, max_depth: usize, rng: &mut Rng) -> TreeModel<T> {
    let mut nodes = Vec::new();
    grow(&mut nodes, m, 0, max_depth, rng);
    TreeModel::from_nodes(nodes, m, max_depth).expect("generated arena is valid")
}

pub fn random_rows<T: Scalar>(rows: usize, m: usize, rng: &mut Rng) -> Matrix<T> {
    let data = (0..rows * m).map(|_| T::lit(lattice_value(rng))).collect();
    Matrix::new(rows, m, data).expect("sized")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub cases: usize,
    pub instances: usize,
    pub max_tree_shap_error: f64,
    pub max_kernel_shap_error: f64,
    pub tree_shap_violations: usize,
    pub kernel_shap_violations: usize,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.cases > 0 && self.tree_shap_violations == 0 && self.kernel_shap_violations == 0
    }
}

/// Compares Tree SHAP and fully enumerated Kernel SHAP with exact Shapley
/// values on `cases` random trees (depth <= 4, M <= 4, <= 32 background rows,
/// `instances_per_case` explained points each).
pub fn sweep(cases: usize, instances_per_case: usize, base_seed: u64) -> Result<OracleReport> {
    let per_case = (0..cases)
        .into_par_iter()
        .map(|c| -> Result<(f64, f64, usize, usize)> {
            let mut rng = seed::rng_at(base_seed, &[c as u64]);
            let m = rng.random_range(1..=4);
            let depth = rng.random_range(1..=4);
            let tree = random_tree::<f64>(m, depth, &mut rng);
            let bg = Background::explicit(random_rows(rng.random_range(1..=32), m, &mut rng))?;
            let cfg = ExplainerConfig { full_enumeration: true, ..Default::default() };
            let (mut et, mut ek, mut vt, mut vk) = (0.0f64, 0.0f64, 0, 0);
            for i in 0..instances_per_case {
                let x = random_rows::<f64>(1, m, &mut rng);
                let x = x.row(0);
                let exact = exact_shapley(&tree, x, &bg, i)?;
                let ts = tree_shap(&tree, x, &bg, i)?;
                let ks = kernel_shap(&tree, x, &bg, &cfg, &mut rng, i)?;
                let dt = exact.values.iter().zip(&ts.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let dk = exact.values.iter().zip(&ks.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                et = et.max(dt);
                ek = ek.max(dk);
                vt += usize::from(!(dt <= TREE_SHAP_TOLERANCE));
                vk += usize::from(!(dk <= KERNEL_SHAP_TOLERANCE));
            }
            Ok((et, ek, vt, vk))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = OracleReport { cases, instances: cases * instances_per_case, ..Default::default() };
    for (et, ek, vt, vk) in per_case {
        report.max_tree_shap_error = report.max_tree_shap_error.max(et);
        report.max_kernel_shap_error = report.max_kernel_shap_error.max(ek);
        report.tree_shap_violations += vt;
        report.kernel_shap_violations += vk;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_passes() {
        let r = sweep(40, 4, 1).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.instances, 160);
    }

    #[test]
    fn random_trees_respect_depth() {
        let mut rng = seed::rng(0);
        for _ in 0..50 {
            let t = random_tree::<f64>(3, 4, &mut rng);
            assert!(t.depth() <= 4);
        }
    }
}
