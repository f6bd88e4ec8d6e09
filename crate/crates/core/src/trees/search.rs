use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trained::{fit_model, ModelSpec};
use crate::data::{kfold, Dataset};
use crate::error::{Error, Result};
use crate::model::accuracy;
use crate::scalar::Scalar;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_index: usize,
    pub best: ModelSpec,
    pub cv_accuracy: f64,
    /// Mean fold accuracy of every cell, in grid order.
    pub cell_accuracy: Vec<f64>,
    pub models_trained: usize,
}

/// Exhaustive k-fold search. The first cell in grid order wins ties.
pub fn grid_search<T: Scalar>(ds: &Dataset<T>, grid: &[ModelSpec], k: usize, seed: u64) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty parameter grid".into()));
    }
    let folds = kfold(ds.len(), k, seed::derive(seed, &[0]))?;
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|c| (0..k).map(move |f| (c, f))).collect();
    let scores = jobs
        .par_iter()
        .map(|&(c, f)| {
            let fold = &folds[f];
            let model = fit_model(&ds.subset(&fold.train), &grid[c], seed::derive(seed, &[1, c as u64, f as u64]))?;
            Ok(accuracy(&model, &ds.subset(&fold.test)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let cell_accuracy: Vec<f64> = scores.chunks(k).map(|s| s.iter().sum::<f64>() / k as f64).collect();
    let mut best_index = 0;
    for (i, &a) in cell_accuracy.iter().enumerate() {
        if a > cell_accuracy[best_index] {
            best_index = i;
        }
    }
    Ok(GridSearchResult {
        best_index,
        best: grid[best_index],
        cv_accuracy: cell_accuracy[best_index],
        cell_accuracy,
        models_trained: jobs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate, BoolFunction, SyntheticSpec};
    use crate::trees::TreeParams;

    fn xor() -> Dataset<f64> {
        generate(&SyntheticSpec::new(BoolFunction::Xor, 0.0, 0.0, 1000, 3)).unwrap()
    }

    #[test]
    fn singleton_grid() {
        let cell = ModelSpec::Tree(TreeParams::default());
        let r = grid_search(&xor(), &[cell], 3, 0).unwrap();
        assert_eq!((r.best_index, r.best), (0, cell));
    }

    #[test]
    fn depth_two_beats_depth_one_on_xor() {
        let grid = [
            ModelSpec::Tree(TreeParams { max_depth: 1, ..Default::default() }),
            ModelSpec::Tree(TreeParams { max_depth: 2, ..Default::default() }),
        ];
        let r = grid_search(&xor(), &grid, 10, 5).unwrap();
        assert_eq!(r.best_index, 1);
        assert!(r.cell_accuracy[1] > 0.98, "{:?}", r.cell_accuracy);
        assert!(r.cell_accuracy[0] < 0.9, "{:?}", r.cell_accuracy);
        assert_eq!(r.models_trained, 20);
    }

    #[test]
    fn ties_keep_first_cell() {
        let a = ModelSpec::Tree(TreeParams { max_depth: 2, ..Default::default() });
        let b = ModelSpec::Tree(TreeParams { max_depth: 2, min_samples_split: 3, feature_subsample: None });
        let r = grid_search(&xor(), &[a, b], 4, 1).unwrap();
        assert_eq!(r.cell_accuracy[0], r.cell_accuracy[1]);
        assert_eq!(r.best_index, 0);
    }

    #[test]
    fn empty_grid_is_an_error() {
        assert!(grid_search(&xor(), &[], 10, 0).is_err());
    }
}
