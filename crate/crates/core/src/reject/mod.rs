//! Reject inference: a simulated accept/reject policy over labelled data, the
//! augmentation, extrapolation and label-spreading strategies, and their evaluation
//! on an unbiased holdout.

mod augment;
mod evaluate;
mod extrapolate;
mod scenario;
mod spreading;
mod synthetic;

pub use augment::{
    acceptance_model, augment_downward, augment_fuzzy, augment_soft_cutoff, augment_upward,
    AcceptanceModel, AugmentedTrainingSet, Provenance, ACCEPT_CLIP,
};
pub use evaluate::{build_training_set, evaluate_ri, run_ri, KickoutVolume, RiConfig, RiRow, Strategy};
pub use extrapolate::{extrapolate, ExtrapolationVariant};
pub use scenario::{
    hash_partition, scenario_from_parts, simulate_rejection, RejectScenario, ScenarioConfig,
    ScenarioRecord, ScenarioStats,
};
pub use spreading::{
    augment_label_spreading, label_spreading, spread_labels, SpreadingConfig, SpreadingResult,
};
pub use synthetic::{synthetic_homecredit, SYNTHETIC_POLICY_FEATURES};
