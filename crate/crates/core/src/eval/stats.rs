use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::split::stratified_split;
use crate::linalg::Mat;
use crate::seed::derive_seed;
use crate::svm::OvRModel;

pub fn accuracy(predictions: &[u32], truth: &[u32]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Parameter("accuracy of an empty set".into()));
    }
    if predictions.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} truth labels",
            predictions.len(),
            truth.len()
        )));
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics at position `q·(n−1)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn five_number(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return Err(Error::Parameter("five-number summary needs finite values".into()));
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(FiveNumber {
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsplitStats {
    pub accuracies: Vec<f64>,
    pub summary: FiveNumber,
}

/// Accuracy on the kept side of `n_splits` stratified splits of the test set.
/// Split `k` uses seed `derive_seed(seed, [k])`.
pub fn subsplit_from_predictions(
    predictions: &[u32],
    truth: &[u32],
    n_splits: usize,
    keep: f64,
    seed: u64,
) -> Result<SubsplitStats> {
    if n_splits == 0 {
        return Err(Error::Parameter("n_splits must be >= 1".into()));
    }
    if predictions.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} truth labels",
            predictions.len(),
            truth.len()
        )));
    }
    let accuracies = (0..n_splits)
        .map(|k| {
            let plan = stratified_split(truth, keep, derive_seed(seed, &[k as u64]))?;
            let p: Vec<u32> = plan.train.iter().map(|&i| predictions[i]).collect();
            let t: Vec<u32> = plan.train.iter().map(|&i| truth[i]).collect();
            accuracy(&p, &t)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = five_number(&accuracies)?;
    Ok(SubsplitStats { accuracies, summary })
}

pub fn subsplit_stats(
    model: &OvRModel,
    x_test: &Mat,
    truth: &[u32],
    n_splits: usize,
    keep: f64,
    seed: u64,
) -> Result<SubsplitStats> {
    let predictions = model.predict(x_test)?;
    subsplit_from_predictions(&predictions, truth, n_splits, keep, seed)
}
