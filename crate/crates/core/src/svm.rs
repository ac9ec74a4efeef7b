//! One-vs-rest linear SVM trained by dual coordinate descent.
//!
//! The bias is folded into the weights by appending a constant-1 feature, so
//! the binary problem solved is
//!
//! ```text
//! min  ½(‖w‖² + b²) + C·Σ loss(1 − yᵢ(w·xᵢ + b))
//! ```
//!
//! with the hinge (`L1`) or squared hinge (`L2`) loss. Rows are first put in
//! a canonical order (lexicographic by features, then label), and each epoch
//! visits them in a seeded shuffle of that order, so the trained model does not
//! depend on the order rows were supplied in.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{Archive, TensorEntry};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{axpy, dot, Mat};
use crate::seed::{derive_seed, rng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HingeLoss {
    #[default]
    L1,
    L2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub loss: HingeLoss,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { c: 1.0, tol: 1e-4, max_iter: 1000, loss: HingeLoss::L1 }
    }
}

impl SvmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Parameter(format!("C must be positive, got {}", self.c)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Parameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBinaryModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearBinaryModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }
}

/// Solver state at termination.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace {
    pub epochs: usize,
    pub converged: bool,
    /// Dual variables, one per training row.
    pub alpha: Vec<f64>,
    /// Primal objective after each epoch.
    pub primal: Vec<f64>,
    /// Dual objective (to be minimized) after each epoch.
    pub dual: Vec<f64>,
}

/// Primal objective of the bias-augmented problem.
pub fn primal_objective(model: &LinearBinaryModel, x: &Mat, y: &[f64], cfg: &SvmConfig) -> f64 {
    let reg = 0.5 * (dot(&model.w, &model.w) + model.b * model.b);
    let loss: f64 = (0..x.rows())
        .map(|i| {
            let slack = (1.0 - y[i] * model.decision(x.row(i))).max(0.0);
            match cfg.loss {
                HingeLoss::L1 => slack,
                HingeLoss::L2 => slack * slack,
            }
        })
        .sum();
    reg + cfg.c * loss
}

pub fn train_binary(x: &Mat, y: &[f64], cfg: &SvmConfig, seed: u64) -> Result<LinearBinaryModel> {
    train_binary_traced(x, y, cfg, seed).map(|(m, _)| m)
}

pub fn train_binary_traced(
    x: &Mat,
    y: &[f64],
    cfg: &SvmConfig,
    seed: u64,
) -> Result<(LinearBinaryModel, TrainTrace)> {
    cfg.validate()?;
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::InsufficientData("SVM training needs at least one row".into()));
    }
    if y.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", y.len())));
    }
    if let Some(bad) = y.iter().find(|v| **v != 1.0 && **v != -1.0) {
        return Err(Error::Parameter(format!("labels must be ±1, found {bad}")));
    }

    let (diag, upper) = match cfg.loss {
        HingeLoss::L1 => (0.0, cfg.c),
        HingeLoss::L2 => (0.5 / cfg.c, f64::INFINITY),
    };
    let qd: Vec<f64> = (0..n).map(|i| dot(x.row(i), x.row(i)) + 1.0 + diag).collect();
    let mut alpha = vec![0.0f64; n];
    let mut model = LinearBinaryModel { w: vec![0.0; d], b: 0.0 };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let by_row = x.row(a).iter().zip(x.row(b)).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne());
        by_row.unwrap_or(Ordering::Equal).then(y[a].total_cmp(&y[b]))
    });
    let mut r = rng(seed);
    let mut trace = TrainTrace { epochs: 0, converged: false, alpha: vec![], primal: vec![], dual: vec![] };

    while trace.epochs < cfg.max_iter {
        order.shuffle(&mut r);
        let mut max_violation = 0.0f64;
        for &i in &order {
            let xi = x.row(i);
            let g = y[i] * model.decision(xi) - 1.0 + diag * alpha[i];
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == upper {
                g.max(0.0)
            } else {
                g
            };
            max_violation = max_violation.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, upper);
                let step = (alpha[i] - old) * y[i];
                axpy(step, xi, &mut model.w);
                model.b += step;
            }
        }
        trace.epochs += 1;
        trace.primal.push(primal_objective(&model, x, y, cfg));
        let quad = 0.5 * (dot(&model.w, &model.w) + model.b * model.b);
        let lin: f64 = alpha.iter().sum();
        let reg: f64 = 0.5 * diag * alpha.iter().map(|a| a * a).sum::<f64>();
        trace.dual.push(quad + reg - lin);
        if max_violation < cfg.tol {
            trace.converged = true;
            break;
        }
    }
    trace.alpha = alpha;
    Ok((model, trace))
}

/// One linear scorer per class; classes sorted ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct OvRModel {
    pub classes: Vec<u32>,
    pub models: Vec<LinearBinaryModel>,
    pub c: f64,
}

pub fn feature_mat(m: &FeatureMatrix) -> Mat {
    Mat::from_vec(m.n(), m.d(), m.data().iter().map(|&v| f64::from(v)).collect())
}

impl OvRModel {
    /// Trains class `c` against the rest with seed `derive_seed(seed, [c])`.
    pub fn train(x: &Mat, labels: &[u32], cfg: &SvmConfig, seed: u64) -> Result<Self> {
        if labels.len() != x.rows() {
            return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), x.rows())));
        }
        let mut classes = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::DegenerateLabels(format!(
                "one-vs-rest needs at least 2 classes, found {}",
                classes.len()
            )));
        }
        let models = classes
            .par_iter()
            .map(|&c| {
                let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
                train_binary(x, &y, cfg, derive_seed(seed, &[u64::from(c)]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { classes, models, c: cfg.c })
    }

    pub fn fit(train: &FeatureMatrix, cfg: &SvmConfig, seed: u64) -> Result<Self> {
        Self::train(&feature_mat(train), train.labels(), cfg, seed)
    }

    pub fn d(&self) -> usize {
        self.models.first().map_or(0, |m| m.w.len())
    }

    /// `n × classes` matrix of `w_c·x + b_c`.
    pub fn decision_scores(&self, x: &Mat) -> Result<Mat> {
        if x.cols() != self.d() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.d(),
                x.cols()
            )));
        }
        let k = self.classes.len();
        let mut scores = Mat::zeros(x.rows(), k);
        for i in 0..x.rows() {
            for (c, m) in self.models.iter().enumerate() {
                scores.set(i, c, m.decision(x.row(i)));
            }
        }
        Ok(scores)
    }

    /// Class with the largest score; ties go to the lowest class id.
    pub fn predict(&self, x: &Mat) -> Result<Vec<u32>> {
        let scores = self.decision_scores(x)?;
        Ok((0..x.rows())
            .map(|i| {
                let row = scores.row(i);
                let best = (1..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best });
                self.classes[best]
            })
            .collect())
    }

    /// Entries `C`, then `class.{id}.w` (`[d]`) and `class.{id}.b` (`[1]`) per class.
    pub fn to_archive(&self) -> Archive {
        let mut a = Archive::new();
        a.push(TensorEntry::scalar("C", self.c as f32)).expect("unique");
        for (class, m) in self.classes.iter().zip(&self.models) {
            let w = m.w.iter().map(|&v| v as f32).collect();
            a.push(TensorEntry::vector(format!("class.{class}.w"), w)).expect("unique");
            a.push(TensorEntry::scalar(format!("class.{class}.b"), m.b as f32)).expect("unique");
        }
        a
    }

    pub fn from_archive(a: &Archive) -> Result<Self> {
        let c = f64::from(a.scalar("C")?);
        let mut classes = Vec::new();
        let mut models = Vec::new();
        for e in a.entries() {
            let Some(id) = e.name.strip_prefix("class.").and_then(|s| s.strip_suffix(".w")) else {
                continue;
            };
            let class: u32 = id
                .parse()
                .map_err(|_| Error::Format(format!("bad class entry '{}'", e.name)))?;
            let b = a.scalar(&format!("class.{class}.b"))?;
            classes.push(class);
            models.push(LinearBinaryModel {
                w: e.values.iter().map(|&v| f64::from(v)).collect(),
                b: f64::from(b),
            });
        }
        if classes.len() < 2 || !classes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Format("OvR archive needs >= 2 classes in ascending order".into()));
        }
        Ok(Self { classes, models, c })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_hard_margin() {
        let x = Mat::from_vec(2, 1, vec![-1.0, 1.0]);
        let y = [-1.0, 1.0];
        let cfg = SvmConfig { c: 1000.0, ..Default::default() };
        let (m, trace) = train_binary_traced(&x, &y, &cfg, 0).unwrap();
        assert!(trace.converged);
        assert!((m.w[0] - 1.0).abs() < 1e-2 && m.b.abs() < 1e-2, "{m:?}");
        for (i, yi) in y.iter().enumerate() {
            assert!((yi * m.decision(x.row(i)) - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn parameter_errors() {
        let x = Mat::from_vec(2, 1, vec![0.0, 1.0]);
        let y = [1.0, -1.0];
        let bad_c = SvmConfig { c: 0.0, ..Default::default() };
        assert!(matches!(train_binary(&x, &y, &bad_c, 0), Err(Error::Parameter(_))));
        let bad_tol = SvmConfig { tol: -1.0, ..Default::default() };
        assert!(matches!(train_binary(&x, &y, &bad_tol, 0), Err(Error::Parameter(_))));
        assert!(matches!(train_binary(&x, &[1.0], &SvmConfig::default(), 0), Err(Error::Shape(_))));
        assert!(matches!(
            OvRModel::train(&x, &[4, 4], &SvmConfig::default(), 0),
            Err(Error::DegenerateLabels(_))
        ));
    }

    #[test]
    fn single_class_gives_constant_sign() {
        let x = Mat::from_vec(3, 2, vec![0.0, 1.0, 2.0, -1.0, 0.5, 0.5]);
        let m = train_binary(&x, &[1.0, 1.0, 1.0], &SvmConfig::default(), 1).unwrap();
        assert!((0..3).all(|i| m.decision(x.row(i)) > 0.0));
    }

    #[test]
    fn zero_model_ties_go_to_lowest_class() {
        let model = OvRModel {
            classes: vec![3, 5, 9],
            models: vec![LinearBinaryModel { w: vec![0.0; 2], b: 0.0 }; 3],
            c: 1.0,
        };
        let x = Mat::from_vec(2, 2, vec![1.0, 2.0, -3.0, 0.5]);
        assert!(model.decision_scores(&x).unwrap().data().iter().all(|&s| s == 0.0));
        assert_eq!(model.predict(&x).unwrap(), vec![3, 3]);
        assert!(model.predict(&Mat::zeros(1, 3)).is_err());
    }

    #[test]
    fn uniform_shift_keeps_predictions() {
        let w = vec![0.4, -1.1];
        let model = OvRModel {
            classes: vec![0, 1, 2],
            models: vec![
                LinearBinaryModel { w: w.clone(), b: 0.3 },
                LinearBinaryModel { w: w.clone(), b: -0.2 },
                LinearBinaryModel { w, b: 0.1 },
            ],
            c: 1.0,
        };
        let x = Mat::from_vec(2, 2, vec![1.0, 2.0, -3.0, 0.5]);
        let shifted = Mat::from_fn(2, 2, |i, j| x.get(i, j) + 7.5);
        assert_eq!(model.predict(&x).unwrap(), model.predict(&shifted).unwrap());
    }

    #[test]
    fn archive_round_trip() {
        let x = Mat::from_vec(4, 2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let model = OvRModel::train(&x, &[2, 7, 7, 11], &SvmConfig::default(), 3).unwrap();
        let back = OvRModel::from_archive(&model.to_archive()).unwrap();
        assert_eq!(back.classes, model.classes);
        assert_eq!(back.predict(&x).unwrap(), model.predict(&x).unwrap());
    }
}
