use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::svm::OvRModel;

/// One operating point: accept when `score >= threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// `None` stands for +∞ (nothing accepted).
    pub threshold: Option<f64>,
    pub fmr: f64,
    pub tpr: f64,
}

/// Exact threshold sweep: a leading +∞ point, then one point per distinct
/// score in descending order. FMR and TPR are non-decreasing along it and the
/// last point is `(1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub genuine_count: usize,
    pub impostor_count: usize,
}

pub fn roc_curve(genuine: &[f64], impostor: &[f64]) -> Result<RocCurve> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::DegenerateScores(format!(
            "ROC needs genuine and impostor scores, got {} and {}",
            genuine.len(),
            impostor.len()
        )));
    }
    if genuine.iter().chain(impostor).any(|s| s.is_nan()) {
        return Err(Error::DegenerateScores("NaN score".into()));
    }
    let desc = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_unstable_by(|a, b| b.total_cmp(a));
        v
    };
    let (g, im) = (desc(genuine), desc(impostor));
    let (ng, ni) = (g.len() as f64, im.len() as f64);

    let mut points = vec![RocPoint { threshold: None, fmr: 0.0, tpr: 0.0 }];
    let (mut gi, mut ii) = (0, 0);
    while gi < g.len() || ii < im.len() {
        let t = match (g.get(gi), im.get(ii)) {
            (Some(&a), Some(&b)) => a.max(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while gi < g.len() && g[gi] >= t {
            gi += 1;
        }
        while ii < im.len() && im[ii] >= t {
            ii += 1;
        }
        points.push(RocPoint { threshold: Some(t), fmr: ii as f64 / ni, tpr: gi as f64 / ng });
    }
    Ok(RocCurve { points, genuine_count: g.len(), impostor_count: im.len() })
}

/// Genuine score `scores[i][truth_i]`, impostor scores `scores[i][c]` for every
/// other class.
pub fn split_scores(scores: &Mat, classes: &[u32], truth: &[u32]) -> Result<(Vec<f64>, Vec<f64>)> {
    if scores.rows() != truth.len() || scores.cols() != classes.len() {
        return Err(Error::Shape(format!(
            "{}x{} score matrix for {} rows and {} classes",
            scores.rows(),
            scores.cols(),
            truth.len(),
            classes.len()
        )));
    }
    let mut genuine = Vec::with_capacity(truth.len());
    let mut impostor = Vec::with_capacity(truth.len() * classes.len().saturating_sub(1));
    for (i, t) in truth.iter().enumerate() {
        let own = classes.binary_search(t).map_err(|_| {
            Error::DegenerateScores(format!("test class {t} has no trained classifier"))
        })?;
        for (c, &s) in scores.row(i).iter().enumerate() {
            if c == own {
                genuine.push(s);
            } else {
                impostor.push(s);
            }
        }
    }
    Ok((genuine, impostor))
}

pub fn roc_from_scores(model: &OvRModel, x: &Mat, truth: &[u32]) -> Result<RocCurve> {
    let scores = model.decision_scores(x)?;
    let (genuine, impostor) = split_scores(&scores, &model.classes, truth)?;
    roc_curve(&genuine, &impostor)
}

/// TPR of the most permissive sweep point whose FMR does not exceed the
/// target. Step function, no interpolation.
pub fn tpr_at_fmr(curve: &RocCurve, fmr_target: f64) -> f64 {
    curve
        .points
        .iter()
        .filter(|p| p.fmr <= fmr_target)
        .map(|p| p.tpr)
        .fold(0.0, f64::max)
}
