//! Fairness mitigation: reweighing, covariance-constrained logistic regression,
//! constrained boosting, group-specific thresholds, and fairness-aware tuning.

mod constrained;
mod fairgbm;
mod objective;
mod reweigh;
mod threshold;
mod tune;

pub use constrained::{fit_constrained_logistic, ConstrainedFit, ConstraintKind, ConstraintSpec};
pub use fairgbm::{fit_fairgbm, FairGbmSpec, FairnessProxy};
pub use objective::fairness_objective;
pub use reweigh::{reweigh, ReweighTable};
pub use threshold::{
    apply_threshold_policy, fit_threshold_optimizer, GroupPolicy, ThresholdMode, ThresholdPolicy,
};
pub use tune::{
    sample_params, tune, Objective, ParamDist, SearchSpace, Trial, TrialScore, TuneResult,
};
