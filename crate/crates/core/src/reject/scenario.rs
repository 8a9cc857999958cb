//! Simulated accept/reject policy over a fully labelled table.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::learners::{fit_boost, predict_proba_batch, BoostConfig, BoostModel};
use crate::rng;
use crate::tabular::{apply_preprocess, fit_preprocess, split_labels, PreprocessPlan, SplitSpec, Table};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Applicants whose policy probability of default reaches this are rejected.
    pub threshold: f64,
    /// Share of all rows used to train the policy model.
    pub policy_fraction: f64,
    /// Share of all rows held out for validation.
    pub valid_fraction: f64,
    /// Share of all rows held out for testing.
    pub test_fraction: f64,
    /// Features seen only by the policy; empty selects a hash-based half.
    pub policy_features: Vec<String>,
    pub policy_model: BoostConfig,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            threshold: 0.4,
            policy_fraction: 0.1,
            valid_fraction: 0.1,
            test_fraction: 0.2,
            policy_features: Vec::new(),
            policy_model: BoostConfig::default(),
            seed: 0,
        }
    }
}

/// Deterministic half of the feature names, chosen by a hash of each name.
pub fn hash_partition(names: &[String]) -> (Vec<String>, Vec<String>) {
    let (policy, study): (Vec<String>, Vec<String>) = names
        .iter()
        .cloned()
        .partition(|n| rng::derive_seed(0, n, 0) % 2 == 0);
    (policy, study)
}

/// Summary statistics of a simulated policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStats {
    pub pool_size: usize,
    pub accept_share: f64,
    pub reject_share: f64,
    pub accept_default_rate: f64,
    pub reject_default_rate: f64,
}

/// Accept/reject split of a working pool, with study-feature designs for the pool
/// and an unbiased holdout.
///
/// Labels of rejected applicants are kept private; no strategy can reach them.
#[derive(Debug, Clone)]
pub struct RejectScenario {
    pub policy_features: Vec<String>,
    pub study_features: Vec<String>,
    pub policy_model: BoostModel,
    pub policy_plan: PreprocessPlan,
    pub threshold: f64,
    pub seed: u64,
    /// Table rows used to fit the policy model.
    pub policy_rows: Vec<usize>,
    /// Table rows of the working pool, in table order.
    pub pool_rows: Vec<usize>,
    pub valid_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Policy probability of default for each pool row.
    pub policy_scores: Vec<f64>,
    /// Accept decision for each pool row.
    pub accepted: Vec<bool>,
    /// Preprocessing of the study features, fitted on the pool.
    pub study_plan: PreprocessPlan,
    /// Study design of the pool rows.
    pub x_pool: Array2<f64>,
    /// Labels of the accepted pool rows, in pool order.
    pub accepted_labels: Vec<u8>,
    pub x_valid: Array2<f64>,
    pub y_valid: Vec<u8>,
    pub x_test: Array2<f64>,
    pub y_test: Vec<u8>,
    pub stats: ScenarioStats,
    hidden_reject_labels: Vec<u8>,
}

/// Serializable record of a scenario's masks, partition and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub seed: u64,
    pub threshold: f64,
    pub policy_features: Vec<String>,
    pub study_features: Vec<String>,
    pub policy_rows: Vec<usize>,
    pub pool_rows: Vec<usize>,
    pub valid_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub accepted: Vec<bool>,
    pub stats: ScenarioStats,
    pub study_plan_hash: String,
}

impl RejectScenario {
    pub fn accepted_indices(&self) -> Vec<usize> {
        (0..self.accepted.len()).filter(|&i| self.accepted[i]).collect()
    }

    pub fn rejected_indices(&self) -> Vec<usize> {
        (0..self.accepted.len()).filter(|&i| !self.accepted[i]).collect()
    }

    pub fn n_accepted(&self) -> usize {
        self.accepted_labels.len()
    }

    pub fn n_rejected(&self) -> usize {
        self.accepted.len() - self.accepted_labels.len()
    }

    pub fn x_accepted(&self) -> Array2<f64> {
        self.x_pool.select(ndarray::Axis(0), &self.accepted_indices())
    }

    pub fn x_rejected(&self) -> Array2<f64> {
        self.x_pool.select(ndarray::Axis(0), &self.rejected_indices())
    }

    pub fn record(&self) -> ScenarioRecord {
        ScenarioRecord {
            seed: self.seed,
            threshold: self.threshold,
            policy_features: self.policy_features.clone(),
            study_features: self.study_features.clone(),
            policy_rows: self.policy_rows.clone(),
            pool_rows: self.pool_rows.clone(),
            valid_rows: self.valid_rows.clone(),
            test_rows: self.test_rows.clone(),
            accepted: self.accepted.clone(),
            stats: self.stats,
            study_plan_hash: self.study_plan.hash(),
        }
    }

    /// Copy whose hidden labels are replaced by an out-of-range sentinel, for checking
    /// that strategies never read them.
    pub fn with_poisoned_hidden_labels(&self) -> Self {
        let mut s = self.clone();
        s.hidden_reject_labels.iter_mut().for_each(|y| *y = u8::MAX);
        s
    }
}

fn check_fractions(cfg: &ScenarioConfig) -> Result<()> {
    let parts = [cfg.policy_fraction, cfg.valid_fraction, cfg.test_fraction];
    if parts.iter().any(|&f| !(f > 0.0 && f < 1.0)) || parts.iter().sum::<f64>() >= 1.0 {
        return Err(Error::invalid(
            "policy, validation and test fractions must be positive and leave a pool",
        ));
    }
    Ok(())
}

fn design(plan: &PreprocessPlan, t: &Table, rows: &[usize]) -> Result<Array2<f64>> {
    Ok(apply_preprocess(plan, &t.select_rows(rows))?.x)
}

fn default_rate(labels: impl Iterator<Item = u8>) -> f64 {
    let (mut n, mut bad) = (0usize, 0usize);
    for y in labels {
        n += 1;
        bad += usize::from(y);
    }
    if n == 0 {
        f64::NAN
    } else {
        bad as f64 / n as f64
    }
}

/// Balanced class weights `n / (2 n_c)`.
pub(crate) fn balanced_weights(y: &[u8], base: Option<&[f64]>) -> Vec<f64> {
    let w = |i: usize| base.map_or(1.0, |b| b[i]);
    let mut tot = [0.0; 2];
    for (i, &yi) in y.iter().enumerate() {
        tot[yi as usize] += w(i);
    }
    let all = tot[0] + tot[1];
    y.iter()
        .enumerate()
        .map(|(i, &yi)| {
            if tot[yi as usize] > 0.0 {
                w(i) * all / (2.0 * tot[yi as usize])
            } else {
                w(i)
            }
        })
        .collect()
}

/// Splits off an unbiased holdout, trains the policy model on a small subsample of
/// the policy features, and accepts pool rows whose policy score is below the
/// threshold.
pub fn simulate_rejection(table: &Table, cfg: &ScenarioConfig) -> Result<RejectScenario> {
    check_fractions(cfg)?;
    let names: Vec<String> = table.features().iter().map(|c| c.spec.name.clone()).collect();
    let (policy_features, study_features) = if cfg.policy_features.is_empty() {
        hash_partition(&names)
    } else {
        if let Some(n) = cfg.policy_features.iter().find(|n| !names.contains(n)) {
            return Err(Error::Schema(format!("unknown policy feature {n:?}")));
        }
        let study = names.iter().filter(|n| !cfg.policy_features.contains(n)).cloned().collect();
        (cfg.policy_features.clone(), study)
    };
    if policy_features.is_empty() || study_features.is_empty() {
        return Err(Error::invalid("policy and study feature sets must both be non-empty"));
    }

    let rest = 1.0 - cfg.valid_fraction - cfg.test_fraction;
    let parts = split_labels(
        table.labels(),
        &SplitSpec {
            seed: rng::derive_seed(cfg.seed, "reject-holdout", 0),
            fractions: [rest, cfg.valid_fraction, cfg.test_fraction],
            n_repeats: 1,
            fixed_test: false,
        },
    )?
    .remove(0);
    let n_policy = ((cfg.policy_fraction * table.n_rows() as f64).round() as usize).clamp(1, parts.train.len() - 1);
    let mut r = rng::stream(cfg.seed, "reject-policy-rows");
    let mut is_policy = vec![false; parts.train.len()];
    for k in rand::seq::index::sample(&mut r, parts.train.len(), n_policy) {
        is_policy[k] = true;
    }
    let policy_rows: Vec<usize> = parts.train.iter().zip(&is_policy).filter(|(_, &p)| p).map(|(&i, _)| i).collect();
    let pool_rows: Vec<usize> = parts.train.iter().zip(&is_policy).filter(|(_, &p)| !p).map(|(&i, _)| i).collect();

    // policy model on its own features and rows
    let policy_table = table.select_features(&policy_features)?;
    let policy_train = policy_table.select_rows(&policy_rows);
    let policy_plan = fit_preprocess(&policy_train, false)?;
    let xp = apply_preprocess(&policy_plan, &policy_train)?.x;
    let wp = balanced_weights(policy_train.labels(), None);
    let policy_cfg = BoostConfig {
        seed: rng::derive_seed(cfg.seed, "reject-policy-model", 0),
        ..cfg.policy_model.clone()
    };
    let policy_model = fit_boost(xp.view(), policy_train.labels(), &wp, &policy_cfg)?;
    let policy_scores = predict_proba_batch(&policy_model, design(&policy_plan, &policy_table, &pool_rows)?.view())?;

    let accepted: Vec<bool> = policy_scores.iter().map(|&s| s < cfg.threshold).collect();
    let n_acc = accepted.iter().filter(|&&a| a).count();
    if n_acc == 0 || n_acc == accepted.len() {
        let (lo, hi) = policy_scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        return Err(Error::invalid(format!(
            "threshold {} outside the policy score range [{lo:.4}, {hi:.4}] gives an all-{} scenario",
            cfg.threshold,
            if n_acc == 0 { "reject" } else { "accept" }
        )));
    }

    let study_table = table.select_features(&study_features)?;
    let pool_table = study_table.select_rows(&pool_rows);
    let study_plan = fit_preprocess(&pool_table, false)?;
    let x_pool = apply_preprocess(&study_plan, &pool_table)?.x;
    let labels = table.labels();
    let accepted_labels: Vec<u8> = pool_rows.iter().zip(&accepted).filter(|(_, &a)| a).map(|(&i, _)| labels[i]).collect();
    let hidden_reject_labels: Vec<u8> = pool_rows.iter().zip(&accepted).filter(|(_, &a)| !a).map(|(&i, _)| labels[i]).collect();
    let n = pool_rows.len() as f64;
    let stats = ScenarioStats {
        pool_size: pool_rows.len(),
        accept_share: n_acc as f64 / n,
        reject_share: 1.0 - n_acc as f64 / n,
        accept_default_rate: default_rate(accepted_labels.iter().copied()),
        reject_default_rate: default_rate(hidden_reject_labels.iter().copied()),
    };
    log::info!(
        "reject scenario: {} pool rows, reject share {:.3}, default rate accepts {:.3} rejects {:.3}",
        stats.pool_size,
        stats.reject_share,
        stats.accept_default_rate,
        stats.reject_default_rate
    );
    Ok(RejectScenario {
        x_valid: design(&study_plan, &study_table, &parts.valid)?,
        y_valid: parts.valid.iter().map(|&i| labels[i]).collect(),
        x_test: design(&study_plan, &study_table, &parts.test)?,
        y_test: parts.test.iter().map(|&i| labels[i]).collect(),
        policy_features,
        study_features,
        policy_model,
        policy_plan,
        threshold: cfg.threshold,
        seed: cfg.seed,
        policy_rows,
        pool_rows,
        valid_rows: parts.valid,
        test_rows: parts.test,
        policy_scores,
        accepted,
        study_plan,
        x_pool,
        accepted_labels,
        stats,
        hidden_reject_labels,
    })
}

/// Builds a scenario directly from study designs, for tests and small experiments.
#[doc(hidden)]
pub fn scenario_from_parts(
    x_pool: ArrayView2<f64>,
    labels: &[u8],
    accepted: &[bool],
    x_test: ArrayView2<f64>,
    y_test: &[u8],
) -> Result<RejectScenario> {
    use crate::tabular::{ColumnData, ColumnSpec, FeatureColumn};
    if labels.len() != x_pool.nrows() || accepted.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x_pool.nrows(),
            actual: labels.len().min(accepted.len()),
        });
    }
    let cols = (0..x_pool.ncols())
        .map(|j| FeatureColumn {
            spec: ColumnSpec::numeric(format!("x{j}")),
            data: ColumnData::Numeric(x_pool.column(j).iter().map(|&v| Some(v)).collect()),
        })
        .collect();
    let t = Table::new(cols, labels.to_vec(), None)?;
    let plan = fit_preprocess(&t, false)?;
    let accepted_labels: Vec<u8> = labels.iter().zip(accepted).filter(|(_, &a)| a).map(|(&y, _)| y).collect();
    let hidden: Vec<u8> = labels.iter().zip(accepted).filter(|(_, &a)| !a).map(|(&y, _)| y).collect();
    let n_acc = accepted_labels.len();
    let n = labels.len() as f64;
    Ok(RejectScenario {
        policy_features: Vec::new(),
        study_features: plan.input_names(),
        policy_model: BoostModel {
            trees: Vec::new(),
            learning_rate: 0.1,
            base_score: 0.0,
            n_features: 0,
            train_loss: Vec::new(),
            multipliers: Vec::new(),
        },
        policy_plan: plan.clone(),
        threshold: f64::NAN,
        seed: 0,
        policy_rows: Vec::new(),
        pool_rows: (0..labels.len()).collect(),
        valid_rows: Vec::new(),
        test_rows: Vec::new(),
        policy_scores: vec![f64::NAN; labels.len()],
        accepted: accepted.to_vec(),
        study_plan: plan,
        x_pool: x_pool.to_owned(),
        x_valid: x_test.to_owned(),
        y_valid: y_test.to_vec(),
        x_test: x_test.to_owned(),
        y_test: y_test.to_vec(),
        stats: ScenarioStats {
            pool_size: labels.len(),
            accept_share: n_acc as f64 / n,
            reject_share: 1.0 - n_acc as f64 / n,
            accept_default_rate: default_rate(accepted_labels.iter().copied()),
            reject_default_rate: default_rate(hidden.iter().copied()),
        },
        accepted_labels,
        hidden_reject_labels: hidden,
    })
}
