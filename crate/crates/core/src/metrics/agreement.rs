use crate::error::{Error, Result};

/// Euclidean distance between two share vectors.
pub fn consistency(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Feature indices by descending share; ties go to the lower index.
pub fn ranking(shares: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..shares.len()).collect();
    idx.sort_by(|&i, &j| shares[j].total_cmp(&shares[i]).then(i.cmp(&j)));
    idx
}

fn check_k(a: &[usize], b: &[usize], k: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    if k == 0 || k > a.len() {
        return Err(Error::InvalidArgument(format!("top-k size {k} outside 1..={}", a.len())));
    }
    Ok(())
}

/// Fraction of the top-k features of `a` that are also in the top-k of `b`.
pub fn feature_agreement(a: &[usize], b: &[usize], k: usize) -> Result<f64> {
    check_k(a, b, k)?;
    let common = a[..k].iter().filter(|f| b[..k].contains(f)).count();
    Ok(common as f64 / k as f64)
}

/// Fraction of the top-k positions holding the same feature in both rankings.
pub fn rank_agreement(a: &[usize], b: &[usize], k: usize) -> Result<f64> {
    check_k(a, b, k)?;
    let same = a[..k].iter().zip(&b[..k]).filter(|(x, y)| x == y).count();
    Ok(same as f64 / k as f64)
}
