//! Responsible credit scoring toolkit.
//!
//! The crate is organised along the life of a credit model:
//!
//! - [`tabular`]: dataset profiles, typed tables, leakage-safe preprocessing and splits.
//! - [`learners`]: logistic regression, decision trees, random forests and gradient
//!   boosting, all behind the [`learners::Predictor`] contract and all accepting
//!   per-sample weights.
//! - [`metrics`]: AUC, balanced accuracy, KS threshold, group and individual fairness
//!   measurements, kickout and approval rate.
//! - [`mitigation`]: reweighing, covariance-constrained logistic regression,
//!   fairness-constrained boosting, the group threshold optimizer and the
//!   fairness-penalized tuning objective.
//! - [`reject`]: accept/reject simulation and reject inference strategies.
//! - [`explain`]: importances, PD/ICE curves, Shapley values, local surrogates and
//!   counterfactual search.

pub mod error;
pub mod explain;
pub mod learners;
pub mod metrics;
pub mod mitigation;
pub mod reject;
pub mod rng;
pub mod tabular;

pub use error::{Error, Result};
