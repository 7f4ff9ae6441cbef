use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ClassLabel, Dataset, MotionSample};
use crate::error::{Error, Result};

/// Indices into the original (unaugmented) dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles each class with the seeded generator and deals its samples
/// round-robin over the folds. The dealing position carries over from one
/// class to the next, so fold sizes differ by at most one as well.
pub fn stratified_kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs k >= 2, got {k}")));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k > dataset.len() {
        return Err(Error::Config(format!(
            "{k} folds for only {} samples",
            dataset.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut owner = vec![0; dataset.len()];
    let mut next = 0;
    for class in ClassLabel::ALL {
        let mut members: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.samples[i].label == class)
            .collect();
        members.shuffle(&mut rng);
        for i in members {
            owner[i] = next % k;
            next += 1;
        }
    }
    Ok((0..k)
        .map(|fold| {
            let (test, train) = (0..dataset.len()).partition(|&i| owner[i] == fold);
            FoldSplit { fold, train, test }
        })
        .collect())
}

/// Fails if a test sample is synthetic or also present in training.
pub fn check_leakage<'a>(
    train: impl IntoIterator<Item = &'a MotionSample>,
    test: impl IntoIterator<Item = &'a MotionSample>,
) -> Result<()> {
    let train_ids: HashSet<&str> = train.into_iter().map(|s| s.id.as_str()).collect();
    for s in test {
        if s.is_synthetic {
            return Err(Error::Leakage(format!("synthetic sample `{}` in a test split", s.id)));
        }
        if train_ids.contains(s.id.as_str()) {
            return Err(Error::Leakage(format!("sample `{}` in both train and test", s.id)));
        }
    }
    Ok(())
}
