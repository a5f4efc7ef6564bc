use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Scheme;
use crate::error::{Error, Result};
use crate::rng::{stream, stream2, Stream};

pub const N_FOLDS: usize = 10;

/// Test sets over a universe of `n_units` indices. For the cross-subject
/// scheme a unit is a subject (an index into the sorted subject list); for
/// intra-subject it is one of that subject's segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub scheme: Scheme,
    pub seed: u64,
    pub n_units: usize,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Units not in fold `f`, ascending.
    pub fn train_units(&self, f: usize) -> Vec<usize> {
        let mut test = vec![false; self.n_units];
        for &u in &self.folds[f] {
            test[u] = true;
        }
        (0..self.n_units).filter(|&u| !test[u]).collect()
    }

    /// Checks that the folds partition `0..n_units`.
    pub fn check_partition(&self) -> Result<()> {
        let mut seen = vec![false; self.n_units];
        for (f, fold) in self.folds.iter().enumerate() {
            for &u in fold {
                if u >= self.n_units || seen[u] {
                    return Err(Error::Config(format!("fold {f}: unit {u} out of range or repeated")));
                }
                seen[u] = true;
            }
        }
        match seen.iter().position(|s| !s) {
            Some(u) => Err(Error::Config(format!("unit {u} is in no fold"))),
            None => Ok(()),
        }
    }
}

/// Shuffle `0..n_units` and deal it into `k` contiguous groups whose sizes
/// differ by at most one (the larger groups first). Test sets are sorted.
pub fn split_units(n_units: usize, k: usize, rng: &mut impl rand::Rng) -> Result<Vec<Vec<usize>>> {
    if k == 0 || n_units < k {
        return Err(Error::TooFewUnits { folds: k, have: n_units });
    }
    let mut order: Vec<usize> = (0..n_units).collect();
    order.shuffle(rng);
    let (base, extra) = (n_units / k, n_units % k);
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = order[at..at + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        at += size;
    }
    Ok(folds)
}

/// Cross-subject plan over `n_subjects` subjects.
pub fn make_cross_folds(n_subjects: usize, seed: u64) -> Result<FoldPlan> {
    let folds = split_units(n_subjects, N_FOLDS, &mut stream(seed, Stream::Folds, 0))?;
    Ok(FoldPlan {
        scheme: Scheme::Cross,
        seed,
        n_units: n_subjects,
        folds,
    })
}

/// Intra-subject plan over one subject's `n_segments` segments. Each subject
/// draws from its own stream so plans do not depend on which other subjects
/// are present.
pub fn make_intra_folds(n_segments: usize, subject: u16, seed: u64) -> Result<FoldPlan> {
    let mut rng = stream2(seed, Stream::Folds, 1, u64::from(subject));
    let folds = split_units(n_segments, N_FOLDS, &mut rng)?;
    Ok(FoldPlan {
        scheme: Scheme::Intra,
        seed,
        n_units: n_segments,
        folds,
    })
}
