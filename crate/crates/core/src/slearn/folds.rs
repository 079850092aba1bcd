use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 10 folds, or one fold per subject below 20 subjects.
pub fn default_fold_count(n: usize) -> usize {
    if n < 20 {
        n
    } else {
        10
    }
}

/// Assignment of each subject index to one of `v` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    v: usize,
    assignment: Vec<usize>,
}

impl FoldPlan {
    /// Validates that `assignment` partitions `0..n` into `v` non-empty folds.
    pub fn from_assignment(v: usize, assignment: Vec<usize>) -> Result<Self> {
        let mut sizes = vec![0usize; v];
        for &f in &assignment {
            if f >= v {
                return Err(Error::InvalidConfig(format!("fold index {f} out of range for v = {v}")));
            }
            sizes[f] += 1;
        }
        if v == 0 || sizes.contains(&0) {
            return Err(Error::InvalidConfig("every fold must be non-empty".into()));
        }
        Ok(Self { v, assignment })
    }

    pub fn leave_one_out(n: usize) -> Self {
        Self { v: n, assignment: (0..n).collect() }
    }

    /// Random folds of near-equal size. `v` is clamped to `n`.
    pub fn random<R: Rng + ?Sized>(n: usize, v: usize, rng: &mut R) -> Result<Self> {
        let v = v.min(n);
        if v < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 folds, have n = {n}, v = {v}")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut assignment = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            assignment[i] = pos % v;
        }
        Self::from_assignment(v, assignment)
    }

    /// Folds stratified on a binary label: each class is shuffled and dealt
    /// round-robin, so every fold holds both classes whenever the minority
    /// class has at least `v` members.
    pub fn stratified<R: Rng + ?Sized>(labels: &[u8], v: usize, rng: &mut R) -> Result<Self> {
        let n = labels.len();
        let v = v.min(n);
        if v < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 folds, have n = {n}, v = {v}")));
        }
        let mut assignment = vec![0; n];
        let mut pos = 0usize;
        for class in [0u8, 1u8] {
            let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
            members.shuffle(rng);
            for i in members {
                assignment[i] = pos % v;
                pos += 1;
            }
        }
        Self::from_assignment(v, assignment)
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// `(training indices, held-out indices)` for `fold`.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignment.len()).partition(|&i| self.assignment[i] != fold)
    }
}
