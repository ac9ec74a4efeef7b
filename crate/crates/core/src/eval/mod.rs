//! Splitting, accuracy, ROC and sub-split statistics, and the per-tap sweep.

mod roc;
mod split;
mod stats;
mod sweep;

pub use roc::{roc_curve, roc_from_scores, split_scores, tpr_at_fmr, RocCurve, RocPoint};
pub use split::{stratified_split, SplitPlan};
pub use stats::{
    accuracy, five_number, quantile, subsplit_from_predictions, subsplit_stats, FiveNumber,
    SubsplitStats,
};
pub use sweep::{
    best_tap, evaluate_tap, extract_features, layer_sweep, BestTap, EvalReport, ScalerFit,
    SweepConfig, TapOutcome, TapResult,
};
