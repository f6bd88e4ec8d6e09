//! Train/test splitting and k-fold partitioning.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    idx
}

fn test_size(n: usize, test_fraction: f64) -> usize {
    ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1)
}

fn check_fraction(test_fraction: f64) -> Result<()> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    Ok(())
}

/// Random split of `0..n`; both index lists are returned sorted.
pub fn split(n: usize, test_fraction: f64, seed: u64) -> Result<SplitIndices> {
    check_fraction(test_fraction)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cannot split {n} instances")));
    }
    let perm = permutation(n, seed);
    let (test, train) = perm.split_at(test_size(n, test_fraction));
    let (mut train, mut test) = (train.to_vec(), test.to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Split that preserves the class ratio in each part.
pub fn split_stratified(labels: &[u8], test_fraction: f64, seed: u64) -> Result<SplitIndices> {
    check_fraction(test_fraction)?;
    let n = labels.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cannot split {n} instances")));
    }
    let perm = permutation(n, seed);
    let n_test = test_size(n, test_fraction);
    let mut test = Vec::with_capacity(n_test);
    for class in [0u8, 1] {
        let members: Vec<usize> = perm.iter().copied().filter(|&i| labels[i] == class).collect();
        let share = (members.len() as f64 * n_test as f64 / n as f64).round() as usize;
        test.extend_from_slice(&members[..share.min(members.len())]);
    }
    // rounding per class can miss the global target by one
    let mut in_test = vec![false; n];
    test.iter().for_each(|&i| in_test[i] = true);
    while test.len() > n_test {
        let i = test.pop().expect("non-empty");
        in_test[i] = false;
    }
    for &i in &perm {
        if test.len() >= n_test {
            break;
        }
        if !in_test[i] {
            in_test[i] = true;
            test.push(i);
        }
    }
    test.sort_unstable();
    let train = (0..n).filter(|&i| !in_test[i]).collect();
    Ok(SplitIndices { train, test })
}

/// `k` folds over `0..n`; fold sizes differ by at most one.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<SplitIndices>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k}; need at least 2 folds")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds n = {n}")));
    }
    let perm = permutation(n, seed);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test = perm[start..start + size].to_vec();
        test.sort_unstable();
        let mut train: Vec<usize> = perm[..start].iter().chain(&perm[start + size..]).copied().collect();
        train.sort_unstable();
        folds.push(SplitIndices { train, test });
        start += size;
    }
    Ok(folds)
}
