use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::roc::{roc_curve, split_scores, tpr_at_fmr, RocCurve};
use crate::eval::split::SplitPlan;
use crate::eval::stats::{accuracy, subsplit_from_predictions, SubsplitStats};
use crate::features::{FeatureMatrix, MinMaxScaler};
use crate::linalg::Mat;
use crate::model::{ModelSpec, TapIndex, TapPoint};
use crate::normalize::{replicate_channels, NormalizedIris};
use crate::pca::{PcaConfig, PcaModel};
use crate::seed::{derive_seed, stream};
use crate::svm::{feature_mat, OvRModel, SvmConfig};

/// Which rows the min-max ranges are fitted on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerFit {
    #[default]
    TrainOnly,
    AllSamples,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Parent of the PCA, SVM and sub-split seeds.
    pub seed: u64,
    pub tap_point: TapPoint,
    pub scaler_fit: ScalerFit,
    pub pca: PcaConfig,
    pub svm: SvmConfig,
    pub fmr_target: f64,
    pub n_subsplits: usize,
    pub subsplit_keep: f64,
    /// Taps extracted per pass over the images; `None` extracts all at once.
    pub taps_per_pass: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            tap_point: TapPoint::PreActivation,
            scaler_fit: ScalerFit::TrainOnly,
            pca: PcaConfig::default(),
            svm: SvmConfig::default(),
            fmr_target: 0.001,
            n_subsplits: 10,
            subsplit_keep: 0.8,
            taps_per_pass: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TapResult {
    pub tap: TapIndex,
    pub layer_name: String,
    pub feature_len: usize,
    pub pca_dims: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestTap {
    pub tap: TapIndex,
    pub layer_name: String,
    pub accuracy: f64,
    pub fmr_target: f64,
    pub tpr_at_fmr: f64,
    pub roc: RocCurve,
    pub subsplit: SubsplitStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub seed: u64,
    pub split_fraction: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub tap_point: TapPoint,
    pub taps: Vec<TapResult>,
    /// Highest accuracy, lowest tap index on ties; absent for an empty sweep.
    pub best: Option<BestTap>,
}

/// Everything the best-tap statistics need from one tap's pipeline.
#[derive(Clone, Debug)]
pub struct TapOutcome {
    pub result: TapResult,
    pub classes: Vec<u32>,
    /// `n_test × classes` decision values.
    pub scores: Mat,
    pub predictions: Vec<u32>,
    pub truth: Vec<u32>,
}

/// Runs the network once per image and returns one `n × d` matrix per tap.
pub fn extract_features(
    model: &ModelSpec,
    irises: &[NormalizedIris],
    labels: &[u32],
    taps: &BTreeSet<TapIndex>,
    point: TapPoint,
) -> Result<Vec<FeatureMatrix>> {
    if irises.len() != labels.len() {
        return Err(Error::Shape(format!("{} images for {} labels", irises.len(), labels.len())));
    }
    let mut per_image = irises
        .par_iter()
        .map(|iris| model.forward_with_taps(&replicate_channels(iris), taps, point))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(taps.len());
    for &tap in taps {
        let mut data = Vec::new();
        let mut d = 0;
        for activations in &mut per_image {
            let t = activations.remove(&tap).expect("forward returns every requested tap");
            d = t.len();
            data.extend_from_slice(t.data());
        }
        let name = model.layer_name(tap).unwrap_or_default();
        out.push(FeatureMatrix::new(irises.len(), d, data, labels.to_vec(), tap, name)?);
    }
    Ok(out)
}

/// Scale, project and classify one tap's features under `plan`.
pub fn evaluate_tap(features: &FeatureMatrix, plan: &SplitPlan, cfg: &SweepConfig) -> Result<TapOutcome> {
    let tap = features.tap.get() as u64;
    let train = features.select_rows(&plan.train);
    let test = features.select_rows(&plan.test);
    let scaler = match cfg.scaler_fit {
        ScalerFit::TrainOnly => MinMaxScaler::fit(&train)?,
        ScalerFit::AllSamples => MinMaxScaler::fit(features)?,
    };
    let (train, test) = (scaler.transform(&train)?, scaler.transform(&test)?);
    let pca = PcaModel::fit(&train, &cfg.pca, derive_seed(cfg.seed, &[stream::PCA, tap]))?;
    let (train, test) = (pca.transform(&train)?, pca.transform(&test)?);
    let svm = OvRModel::fit(&train, &cfg.svm, derive_seed(cfg.seed, &[stream::SVM, tap]))?;
    let x_test = feature_mat(&test);
    let scores = svm.decision_scores(&x_test)?;
    let predictions = svm.predict(&x_test)?;
    let truth = test.labels().to_vec();
    Ok(TapOutcome {
        result: TapResult {
            tap: features.tap,
            layer_name: features.layer_name.clone(),
            feature_len: features.d(),
            pca_dims: pca.retained,
            accuracy: accuracy(&predictions, &truth)?,
        },
        classes: svm.classes,
        scores,
        predictions,
        truth,
    })
}

fn check_plan(plan: &SplitPlan, n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in plan.train.iter().chain(&plan.test) {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Parameter(format!(
                "split plan index {i} is out of range or repeated for {n} samples"
            )));
        }
    }
    if plan.train.is_empty() || plan.test.is_empty() {
        return Err(Error::Parameter("split plan needs train and test rows".into()));
    }
    Ok(())
}

/// Full per-tap evaluation plus ROC and sub-split statistics for the best tap.
pub fn layer_sweep(
    model: &ModelSpec,
    dataset: &Dataset,
    plan: &SplitPlan,
    taps: &BTreeSet<TapIndex>,
    cfg: &SweepConfig,
) -> Result<EvalReport> {
    check_plan(plan, dataset.len())?;
    if let Some(bad) = taps.iter().find(|t| t.get() == 0 || t.get() > model.conv_count()) {
        return Err(Error::TapOutOfRange { tap: bad.get(), max: model.conv_count() });
    }
    let all: Vec<TapIndex> = taps.iter().copied().collect();
    let chunk = cfg.taps_per_pass.unwrap_or(all.len()).max(1);

    let mut outcomes = Vec::with_capacity(all.len());
    for group in all.chunks(chunk) {
        let group: BTreeSet<TapIndex> = group.iter().copied().collect();
        let features = extract_features(model, &dataset.irises, &dataset.labels, &group, cfg.tap_point)?;
        let done = features
            .into_par_iter()
            .map(|f| evaluate_tap(&f, plan, cfg).map_err(|e| e.at_tap(f.tap.get())))
            .collect::<Result<Vec<_>>>()?;
        outcomes.extend(done);
    }

    let best = outcomes
        .iter()
        .fold(None::<&TapOutcome>, |best, o| match best {
            Some(b) if b.result.accuracy >= o.result.accuracy => Some(b),
            _ => Some(o),
        })
        .map(|o| best_tap(o, cfg).map_err(|e| e.at_tap(o.result.tap.get())))
        .transpose()?;

    Ok(EvalReport {
        model: model.preset.name().to_string(),
        seed: cfg.seed,
        split_fraction: plan.fraction,
        n_train: plan.train.len(),
        n_test: plan.test.len(),
        tap_point: cfg.tap_point,
        taps: outcomes.into_iter().map(|o| o.result).collect(),
        best,
    })
}

pub fn best_tap(o: &TapOutcome, cfg: &SweepConfig) -> Result<BestTap> {
    let (genuine, impostor) = split_scores(&o.scores, &o.classes, &o.truth)?;
    let roc = roc_curve(&genuine, &impostor)?;
    let subsplit = subsplit_from_predictions(
        &o.predictions,
        &o.truth,
        cfg.n_subsplits,
        cfg.subsplit_keep,
        derive_seed(cfg.seed, &[stream::SUBSPLIT]),
    )?;
    Ok(BestTap {
        tap: o.result.tap,
        layer_name: o.result.layer_name.clone(),
        accuracy: o.result.accuracy,
        fmr_target: cfg.fmr_target,
        tpr_at_fmr: tpr_at_fmr(&roc, cfg.fmr_target),
        roc,
        subsplit,
    })
}
