use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng;

/// Disjoint train/test index lists, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub fraction: f64,
    pub seed: u64,
}

impl SplitPlan {
    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per class of size `s`, `round(s·fraction)` clamped to `[1, s−1]` samples go
/// to training. Classes are visited in ascending id order and each is shuffled
/// from one ChaCha8 stream seeded with `seed`.
pub fn stratified_split(labels: &[u32], fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Parameter(format!("split fraction {fraction} outside (0, 1)")));
    }
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut r = rng(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut members) in by_class {
        let s = members.len();
        if s < 2 {
            return Err(Error::Stratification(format!(
                "class {class} has {s} sample, need at least 2 to appear on both sides"
            )));
        }
        let n_train = ((s as f64 * fraction).round() as usize).clamp(1, s - 1);
        members.shuffle(&mut r);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan { train, test, fraction, seed })
}
