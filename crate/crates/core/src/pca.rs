//! PCA through randomized SVD, truncated at a cumulative explained-variance
//! target.
//!
//! The randomized SVD follows the Halko–Martinsson–Tropp range finder: a
//! Gaussian sketch `Y = M·Ω` with `k + oversample` columns, `power_iters`
//! rounds of re-orthonormalized subspace iteration, then an exact SVD of the
//! small projected matrix `B = Qᵀ·M` (Gram-Schmidt `Bᵀ = W·R`, one-sided
//! Jacobi on `Rᵀ`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{Archive, TensorEntry};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{jacobi_svd, mul_abt, mul_atb, orthonormalize_rows, Mat};
use crate::seed::rng;

/// Truncated SVD `M ≈ U·diag(S)·Vᵀ`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `n × k`, orthonormal columns.
    pub u: Mat,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `k × d`; row `c` is the `c`-th right singular vector (so this is `Vᵀ`).
    pub vt: Mat,
}

/// Randomized rank-`k` SVD of an `n × d` matrix.
///
/// Each right singular vector is sign-normalized so that its entry of
/// largest magnitude is positive.
pub fn randomized_svd(m: &Mat, k: usize, oversample: usize, power_iters: usize, seed: u64) -> Result<Svd> {
    let (n, d) = (m.rows(), m.cols());
    let limit = n.min(d);
    if k == 0 || k > limit {
        return Err(Error::Parameter(format!("rank {k} outside 1..={limit} for a {n}x{d} matrix")));
    }
    if k + oversample > limit {
        return Err(Error::Parameter(format!(
            "rank {k} + oversample {oversample} exceeds min(n, d) = {limit}"
        )));
    }
    let l = k + oversample;
    let mut r = rng(seed);

    let omega = Mat::gaussian(l, d, &mut r);
    let mut qt = mul_abt(m, &omega).transpose();
    orthonormalize_rows(&mut qt, &mut r);
    for _ in 0..power_iters {
        let mut zt = mul_atb(&qt.transpose(), m);
        orthonormalize_rows(&mut zt, &mut r);
        qt = mul_abt(m, &zt).transpose();
        orthonormalize_rows(&mut qt, &mut r);
    }

    // B = Qᵀ·M = Rᵀ·W with orthonormal rows W.
    let q = qt.transpose();
    let mut w = mul_atb(&q, m);
    let rr = orthonormalize_rows(&mut w, &mut r);
    let (us, sigma, vs) = jacobi_svd(&rr.transpose());

    let mut vt = mul_atb(&vs.left_cols(k), &w);
    let mut u = mul_abt(&q, &us.left_cols(k).transpose());
    for c in 0..k {
        let row = vt.row(c);
        let pivot = row.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            vt.row_mut(c).iter_mut().for_each(|x| *x = -*x);
            for i in 0..n {
                u.set(i, c, -u.get(i, c));
            }
        }
    }
    Ok(Svd { u, s: sigma[..k].to_vec(), vt })
}

/// Denominator of the explained-variance ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceBase {
    /// Total variance of the centered training data.
    #[default]
    Total,
    /// Variance captured by the computed components only.
    Captured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub cap: usize,
    pub variance_target: f64,
    pub oversample: usize,
    pub power_iters: usize,
    pub variance_base: VarianceBase,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self {
            cap: 2000,
            variance_target: 0.9,
            oversample: 10,
            power_iters: 4,
            variance_base: VarianceBase::Total,
        }
    }
}

/// Slack when comparing cumulative ratios against the target, so that a
/// prefix that reaches the target in exact arithmetic is not lost to rounding.
const CUTOFF_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k × d`, orthonormal rows, most significant first.
    pub components: Mat,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub total_variance: f64,
    pub retained: usize,
}

impl PcaModel {
    pub fn fit(train: &FeatureMatrix, cfg: &PcaConfig, seed: u64) -> Result<Self> {
        let (n, d) = (train.n(), train.d());
        if n < 2 {
            return Err(Error::InsufficientData(format!("PCA needs at least 2 rows, got {n}")));
        }
        if cfg.cap == 0 {
            return Err(Error::Parameter("PCA cap must be >= 1".into()));
        }
        if !(cfg.variance_target > 0.0 && cfg.variance_target <= 1.0) {
            return Err(Error::Parameter(format!(
                "variance target {} outside (0, 1]",
                cfg.variance_target
            )));
        }

        let mut mean = vec![0.0f64; d];
        for row in train.rows() {
            mean.iter_mut().zip(row).for_each(|(m, &x)| *m += f64::from(x));
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = center(train, &mean);
        let dof = (n - 1) as f64;
        let total_variance = centered.data().iter().map(|x| x * x).sum::<f64>() / dof;

        let k = cfg.cap.min(n - 1).min(d);
        let oversample = cfg.oversample.min(n.min(d) - k);
        let svd = randomized_svd(&centered, k, oversample, cfg.power_iters, seed)?;

        let explained_variance: Vec<f64> = svd.s.iter().map(|s| s * s / dof).collect();
        let denom = match cfg.variance_base {
            VarianceBase::Total => total_variance,
            VarianceBase::Captured => explained_variance.iter().sum(),
        };
        let explained_variance_ratio: Vec<f64> = explained_variance
            .iter()
            .map(|v| if denom > 0.0 { v / denom } else { 0.0 })
            .collect();

        let mut cumulative = 0.0;
        let retained = explained_variance_ratio
            .iter()
            .position(|r| {
                cumulative += r;
                cumulative >= cfg.variance_target - CUTOFF_SLACK
            })
            .map_or(k, |i| i + 1)
            .clamp(1, k);

        Ok(Self {
            mean,
            components: svd.vt,
            explained_variance,
            explained_variance_ratio,
            total_variance,
            retained,
        })
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }

    /// Projects centered rows onto the first `retained` components.
    pub fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.d() != self.d() {
            return Err(Error::Shape(format!(
                "PCA fitted on {} features, matrix has {}",
                self.d(),
                m.d()
            )));
        }
        let projected = mul_abt(&center(m, &self.mean), &self.components.top_rows(self.retained));
        m.with_data(self.retained, projected.data().iter().map(|&v| v as f32).collect())
    }

    pub fn cumulative_ratio(&self, m: usize) -> f64 {
        self.explained_variance_ratio[..m].iter().sum()
    }

    /// Stores the model as `f32` tensors: `mean`, `components`,
    /// `explained_variance`, `explained_variance_ratio`, `total_variance`,
    /// `retained`.
    pub fn to_archive(&self) -> Archive {
        let f = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<_>>();
        let mut a = Archive::new();
        let entries = [
            TensorEntry::vector("mean", f(&self.mean)),
            TensorEntry::new(
                "components",
                vec![self.components.rows(), self.components.cols()],
                f(self.components.data()),
            ),
            TensorEntry::vector("explained_variance", f(&self.explained_variance)),
            TensorEntry::vector("explained_variance_ratio", f(&self.explained_variance_ratio)),
            TensorEntry::scalar("total_variance", self.total_variance as f32),
            TensorEntry::scalar("retained", self.retained as f32),
        ];
        entries.into_iter().for_each(|e| a.push(e).expect("unique names"));
        a
    }

    pub fn from_archive(a: &Archive) -> Result<Self> {
        let g = |v: &[f32]| v.iter().map(|&x| f64::from(x)).collect::<Vec<_>>();
        let mean = a.get("mean").ok_or_else(|| missing("mean"))?;
        let d = mean.values.len();
        let comps = a.get("components").ok_or_else(|| missing("components"))?;
        let k = comps.dims.first().copied().unwrap_or(0);
        let comps = a.require("components", &[k, d])?;
        let ev = a.require("explained_variance", &[k])?;
        let ratio = a.require("explained_variance_ratio", &[k])?;
        let retained = a.scalar("retained")? as usize;
        if retained == 0 || retained > k {
            return Err(Error::Format(format!("retained {retained} outside 1..={k}")));
        }
        Ok(Self {
            mean: g(&mean.values),
            components: Mat::from_vec(k, d, g(&comps.values)),
            explained_variance: g(&ev.values),
            explained_variance_ratio: g(&ratio.values),
            total_variance: f64::from(a.scalar("total_variance")?),
            retained,
        })
    }
}

fn missing(name: &str) -> Error {
    Error::Incomplete { missing: vec![name.into()], extra: vec![] }
}

fn center(m: &FeatureMatrix, mean: &[f64]) -> Mat {
    let d = m.d();
    let mut data = vec![0.0f64; m.n() * d];
    data.par_chunks_mut(d).zip(m.data().par_chunks(d)).for_each(|(dst, src)| {
        for ((o, &x), mu) in dst.iter_mut().zip(src).zip(mean) {
            *o = f64::from(x) - mu;
        }
    });
    Mat::from_vec(m.n(), d, data)
}
