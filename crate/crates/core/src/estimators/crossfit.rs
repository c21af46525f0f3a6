use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EstimateError;

/// Assignment of rows to `k` non-overlapping folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignment: Vec<usize>,
    seed: u64,
}

impl FoldPlan {
    /// Random balanced folds: a seeded shuffle dealt round-robin, so fold
    /// sizes differ by at most one.
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self, EstimateError> {
        if k < 2 {
            return Err(EstimateError::Config("cross-fitting needs at least 2 folds".into()));
        }
        if k > n {
            return Err(EstimateError::Config(format!("{k} folds requested for {n} rows")));
        }
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut assignment = vec![0; n];
        for (i, &r) in rows.iter().enumerate() {
            assignment[r] = i % k;
        }
        Ok(Self { k, assignment, seed })
    }

    /// Explicit assignment; every fold in `0..k` must be non-empty.
    pub fn from_assignment(assignment: Vec<usize>, k: usize) -> Result<Self, EstimateError> {
        if k < 2 {
            return Err(EstimateError::Config("cross-fitting needs at least 2 folds".into()));
        }
        let mut seen = vec![false; k];
        for &f in &assignment {
            if f >= k {
                return Err(EstimateError::Config(format!("fold index {f} out of range")));
            }
            seen[f] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(EstimateError::Config("empty fold in assignment".into()));
        }
        Ok(Self { k, assignment, seed: 0 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fold_of(&self, row: usize) -> usize {
        self.assignment[row]
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&r| self.assignment[r] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&r| self.assignment[r] != fold).collect()
    }
}
