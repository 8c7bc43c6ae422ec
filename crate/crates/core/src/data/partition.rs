use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Assignment of every sample to one of `folds` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    assignments: Vec<usize>,
    folds: usize,
}

impl FoldSplit {
    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Sample indices in fold `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    /// Sample indices outside fold `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles `0..n` with a generator keyed by `seed` and deals the result
/// round-robin into `folds` folds, so fold sizes differ by at most one.
pub fn kfold_split(n: usize, folds: usize, seed: u64) -> Result<FoldSplit> {
    if folds < 2 || folds > n {
        return Err(Error::Config(format!(
            "fold count {folds} out of range [2, {n}]"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6b666f6c64_u64));
    order.shuffle(&mut rng);
    let mut assignments = vec![0; n];
    for (pos, &idx) in order.iter().enumerate() {
        assignments[idx] = pos % folds;
    }
    Ok(FoldSplit { assignments, folds })
}

/// One epoch of mini-batches: a permutation of `0..n` keyed by
/// `(seed, epoch)`, cut into chunks of `batch_size` with a shorter final
/// chunk when `n` is not a multiple.
pub fn minibatches(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 || batch_size > n {
        return Err(Error::Config(format!(
            "batch size {batch_size} out of range [1, {n}]"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, 0x6261746368_u64), epoch));
    order.shuffle(&mut rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_of_ten_is_singletons() {
        let split = kfold_split(10, 10, 0).unwrap();
        assert!(split.fold_sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn ten_into_three() {
        let split = kfold_split(10, 3, 0).unwrap();
        let mut sizes = split.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        assert_eq!(split, kfold_split(10, 3, 0).unwrap());
    }

    #[test]
    fn fold_count_bounds() {
        assert!(kfold_split(10, 1, 0).is_err());
        assert!(kfold_split(10, 11, 0).is_err());
    }

    #[test]
    fn batches_cover_indices() {
        let batches = minibatches(6, 2, 3, 0).unwrap();
        assert_eq!(batches.len(), 3);
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());

        let sizes: Vec<usize> = minibatches(5, 2, 3, 0).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
    }

    #[test]
    fn batches_are_deterministic_per_epoch() {
        assert_eq!(minibatches(40, 8, 7, 0).unwrap(), minibatches(40, 8, 7, 0).unwrap());
        assert_ne!(minibatches(40, 8, 7, 0).unwrap(), minibatches(40, 8, 7, 1).unwrap());
        assert!(minibatches(5, 0, 0, 0).is_err());
        assert!(minibatches(5, 6, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_indices(n in 2usize..200, f in 2usize..12, seed in any::<u64>()) {
            prop_assume!(f <= n);
            let split = kfold_split(n, f, seed).unwrap();
            let sizes = split.fold_sizes();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(*lo >= 1 && hi - lo <= 1);
            let mut seen = vec![false; n];
            for fold in 0..f {
                for i in split.test_indices(fold) {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
                prop_assert_eq!(split.train_indices(fold).len() + sizes[fold], n);
            }
            prop_assert!(seen.iter().all(|&s| s));
        }
    }
}
