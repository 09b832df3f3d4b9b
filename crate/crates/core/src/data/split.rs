use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::Rng;

/// Index form of a train/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Test size is `round(n·test_fraction)`, kept within `1..=n-1`.
pub fn split_indices(n: usize, test_fraction: f64, rng: &mut Rng) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples to split, got {n}")));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let perm = rng.permutation(n);
    let (test, train) = perm.split_at(n_test);
    Ok(SplitIndices {
        train: train.to_vec(),
        test: test.to_vec(),
    })
}

pub fn split_train_test(dataset: &Dataset, test_fraction: f64, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
    let idx = split_indices(dataset.len(), test_fraction, rng)?;
    Ok((dataset.subset(&idx.train), dataset.subset(&idx.test)))
}

/// One fold: validation indices and their complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Shuffled balanced partition of `0..n` into `k` folds; the first `n % k`
/// folds carry one extra sample.
pub fn kfold_indices(n: usize, k: usize, rng: &mut Rng) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidInput(format!("k = {k} exceeds the {n} available samples")));
    }
    let perm = rng.permutation(n);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let validation = perm[start..start + size].to_vec();
        let train = perm[..start].iter().chain(&perm[start + size..]).copied().collect();
        folds.push(Fold { train, validation });
        start += size;
    }
    Ok(folds)
}

pub fn kfold_partition(dataset: &Dataset, k: usize, rng: &mut Rng) -> Result<Vec<(Dataset, Dataset)>> {
    Ok(kfold_indices(dataset.len(), k, rng)?
        .into_iter()
        .map(|f| (dataset.subset(&f.train), dataset.subset(&f.validation)))
        .collect())
}
