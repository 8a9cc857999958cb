//! Kickout and approval rate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Kickout between two accept sets of equal size drawn from the same labelled pool:
/// `KB/B − KG/G`, where `KB`/`KG` count bad/good payers accepted by the baseline but
/// not by the new model and `B`/`G` count bad/good payers in the baseline set.
pub fn kickout(baseline_accepts: &[usize], new_accepts: &[usize], labels: &[u8]) -> Result<f64> {
    let base: BTreeSet<usize> = baseline_accepts.iter().copied().collect();
    let new: BTreeSet<usize> = new_accepts.iter().copied().collect();
    if base.len() != baseline_accepts.len() || new.len() != new_accepts.len() {
        return Err(Error::invalid("accept sets must not contain duplicates"));
    }
    if base.len() != new.len() {
        return Err(Error::invalid(format!(
            "kickout needs matched acceptance volume, got {} and {}",
            base.len(),
            new.len()
        )));
    }
    if let Some(&i) = base.iter().chain(&new).find(|&&i| i >= labels.len()) {
        return Err(Error::invalid(format!("accept index {i} outside the pool")));
    }
    let bads = base.iter().filter(|&&i| labels[i] == 1).count();
    let goods = base.len() - bads;
    if bads == 0 || goods == 0 {
        return Err(Error::UndefinedMetric(format!(
            "kickout undefined with {bads} bad and {goods} good baseline accepts"
        )));
    }
    let kicked_bad = base.difference(&new).filter(|&&i| labels[i] == 1).count();
    let kicked_good = base.difference(&new).filter(|&&i| labels[i] == 0).count();
    Ok(kicked_bad as f64 / bads as f64 - kicked_good as f64 / goods as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApprovalRate {
    /// Applicants with score strictly below this are approved; may be ±∞.
    pub threshold: f64,
    pub rate: f64,
    pub diagnostic: Option<String>,
}

/// Largest threshold whose validation accept set `{score < τ}` keeps the empirical
/// bad rate within `budget`, and the share of the population it approves.
///
/// Candidates are the distinct validation scores plus `+∞`; empty accept sets are
/// not considered.
pub fn approval_rate(
    population_scores: &[f64],
    valid_scores: &[f64],
    valid_labels: &[u8],
    budget: f64,
) -> Result<ApprovalRate> {
    if valid_scores.len() != valid_labels.len() {
        return Err(Error::DimensionMismatch {
            expected: valid_scores.len(),
            actual: valid_labels.len(),
        });
    }
    if !(budget > 0.0 && budget <= 1.0) {
        return Err(Error::invalid(format!("budget must lie in (0, 1], got {budget}")));
    }
    if population_scores.is_empty() {
        return Err(Error::UndefinedMetric("approval rate of an empty population".into()));
    }
    let mut order: Vec<usize> = (0..valid_scores.len()).collect();
    order.sort_by(|&a, &b| valid_scores[a].total_cmp(&valid_scores[b]));
    // walk thresholds upwards; the accept set before distinct score s is {score < s}
    let mut best: Option<f64> = None;
    let (mut acc, mut bad) = (0usize, 0usize);
    let mut i = 0;
    loop {
        let tau = if i < order.len() {
            valid_scores[order[i]]
        } else {
            f64::INFINITY
        };
        if acc > 0 && bad as f64 / acc as f64 <= budget {
            best = Some(tau);
        }
        if i >= order.len() {
            break;
        }
        while i < order.len() && valid_scores[order[i]] == tau {
            acc += 1;
            bad += usize::from(valid_labels[order[i]] == 1);
            i += 1;
        }
    }
    Ok(match best {
        Some(t) => ApprovalRate {
            threshold: t,
            rate: population_scores.iter().filter(|&&s| s < t).count() as f64
                / population_scores.len() as f64,
            diagnostic: None,
        },
        None => ApprovalRate {
            threshold: f64::NEG_INFINITY,
            rate: 0.0,
            diagnostic: Some(format!("no threshold keeps the bad rate within {budget}")),
        },
    })
}
