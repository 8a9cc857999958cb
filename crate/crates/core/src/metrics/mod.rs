//! Performance, group-fairness, individual-fairness and reject-inference metrics.

mod fairness;
mod individual;
mod performance;
mod reject;

pub use fairness::{
    fairness_from_predictions, fairness_report, CellCounts, EvalFrame, FairnessReport, GroupRates,
    SignedGaps,
};
pub use individual::{consistency, counterfactual_flip_rate};
pub use performance::{auc, balanced_accuracy, ks_statistic, ks_threshold, threshold_predictions};
pub use reject::{approval_rate, kickout, ApprovalRate};
