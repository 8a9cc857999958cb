//! Training final models on each strategy's set and scoring them on the holdout.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::augment::{
    acceptance_model, augment_downward, augment_fuzzy, augment_soft_cutoff, augment_upward,
    AugmentedTrainingSet,
};
use super::extrapolate::{extrapolate, ExtrapolationVariant};
use super::scenario::{balanced_weights, RejectScenario};
use super::spreading::{augment_label_spreading, SpreadingConfig};
use crate::learners::{fit_family, predict_proba_batch, Family, Model};
use crate::metrics::{approval_rate, auc, balanced_accuracy, kickout, threshold_predictions};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "BM")]
    Baseline,
    #[serde(rename = "SCA")]
    SoftCutoff,
    #[serde(rename = "DA")]
    Downward,
    #[serde(rename = "UA")]
    Upward,
    #[serde(rename = "FA")]
    Fuzzy,
    #[serde(rename = "AE")]
    ExtrapolateAll,
    #[serde(rename = "CE")]
    ExtrapolateConfident,
    #[serde(rename = "BE")]
    ExtrapolateBad,
    #[serde(rename = "LS")]
    LabelSpreading,
}

impl Strategy {
    pub const ALL: [Strategy; 9] = [
        Strategy::Baseline,
        Strategy::SoftCutoff,
        Strategy::Downward,
        Strategy::Upward,
        Strategy::Fuzzy,
        Strategy::ExtrapolateAll,
        Strategy::ExtrapolateConfident,
        Strategy::ExtrapolateBad,
        Strategy::LabelSpreading,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            Strategy::Baseline => "BM",
            Strategy::SoftCutoff => "SCA",
            Strategy::Downward => "DA",
            Strategy::Upward => "UA",
            Strategy::Fuzzy => "FA",
            Strategy::ExtrapolateAll => "AE",
            Strategy::ExtrapolateConfident => "CE",
            Strategy::ExtrapolateBad => "BE",
            Strategy::LabelSpreading => "LS",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown reject-inference strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiConfig {
    /// Learner used for the baseline and every final model.
    pub family: Family,
    pub params: BTreeMap<String, f64>,
    /// Multiply training weights by balanced class weights.
    pub balanced: bool,
    /// Maximum bad rate among approved applicants for the approval rate.
    pub budget: f64,
    pub n_bands: usize,
    /// Per-side fraction for confident extrapolation.
    pub confident_fraction: f64,
    pub spreading: SpreadingConfig,
    pub kickout_volume: KickoutVolume,
}

/// Number of holdout applicants every model accepts when computing kickout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KickoutVolume {
    /// This share of the test holdout, rounded.
    Rate(f64),
    /// A fixed count.
    Count(usize),
    /// As many as the baseline approves at its approval-rate threshold.
    BaselineApprovals,
}

impl Default for RiConfig {
    fn default() -> Self {
        Self {
            family: Family::Boost,
            params: BTreeMap::new(),
            balanced: true,
            budget: 0.05,
            n_bands: 10,
            confident_fraction: 0.1,
            spreading: SpreadingConfig::default(),
            kickout_volume: KickoutVolume::Rate(0.15),
        }
    }
}

/// One row of the reject-inference report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiRow {
    pub strategy: Strategy,
    pub auc: f64,
    pub balanced_accuracy: f64,
    pub approval_rate: f64,
    pub kickout: Option<f64>,
    pub train_rows: usize,
    pub diagnostics: Vec<String>,
}

fn fit_final(s: &RejectScenario, set: &AugmentedTrainingSet, cfg: &RiConfig) -> Result<Model> {
    let w = if cfg.balanced {
        balanced_weights(&set.y, Some(&set.w))
    } else {
        set.w.clone()
    };
    let seed = rng::derive_seed(s.seed, "ri-model", 0);
    fit_family(cfg.family, &cfg.params, set.x.view(), &set.y, &w, seed)
}

/// Training set of one strategy. `base` is the baseline model fit on accepted rows,
/// needed by the extrapolation variants.
pub fn build_training_set(
    s: &RejectScenario,
    strategy: Strategy,
    cfg: &RiConfig,
    base: &Model,
) -> Result<AugmentedTrainingSet> {
    let acc = || acceptance_model(s);
    match strategy {
        Strategy::Baseline => Ok(AugmentedTrainingSet::accepted_only(s)),
        Strategy::SoftCutoff => augment_soft_cutoff(s, &acc()?, cfg.n_bands),
        Strategy::Downward => augment_downward(s, &acc()?),
        Strategy::Upward => augment_upward(s, &acc()?),
        Strategy::Fuzzy => augment_fuzzy(s, &acc()?),
        Strategy::ExtrapolateAll => extrapolate(s, base, ExtrapolationVariant::All, cfg.confident_fraction),
        Strategy::ExtrapolateConfident => {
            extrapolate(s, base, ExtrapolationVariant::Confident, cfg.confident_fraction)
        }
        Strategy::ExtrapolateBad => extrapolate(s, base, ExtrapolationVariant::Bad, cfg.confident_fraction),
        Strategy::LabelSpreading => augment_label_spreading(s, &cfg.spreading),
    }
}

/// The `volume` lowest-scored rows (ties by index).
fn lowest(scores: &[f64], volume: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order.truncate(volume);
    order
}

/// Trains a final model per strategy set and scores it on the unbiased holdout.
/// Kickout compares against the baseline (accepted rows only) at a common volume.
pub fn evaluate_ri(
    s: &RejectScenario,
    sets: &[(Strategy, AugmentedTrainingSet)],
    cfg: &RiConfig,
) -> Result<Vec<RiRow>> {
    let baseline = fit_final(s, &AugmentedTrainingSet::accepted_only(s), cfg)?;
    let base_test = predict_proba_batch(&baseline, s.x_test.view())?;
    let base_valid = predict_proba_batch(&baseline, s.x_valid.view())?;
    let base_ar = approval_rate(&base_test, &base_valid, &s.y_valid, cfg.budget)?;
    let volume = match cfg.kickout_volume {
        KickoutVolume::Rate(r) if (0.0..=1.0).contains(&r) => (r * base_test.len() as f64).round() as usize,
        KickoutVolume::Rate(r) => return Err(Error::invalid(format!("kickout rate {r} outside [0, 1]"))),
        KickoutVolume::Count(c) => c.min(base_test.len()),
        KickoutVolume::BaselineApprovals => base_test.iter().filter(|&&p| p < base_ar.threshold).count(),
    };
    let base_accepts = lowest(&base_test, volume);

    let mut rows = Vec::with_capacity(sets.len());
    for (strategy, set) in sets {
        let (test, valid) = if *strategy == Strategy::Baseline {
            (base_test.clone(), base_valid.clone())
        } else {
            let m = fit_final(s, set, cfg)?;
            (predict_proba_batch(&m, s.x_test.view())?, predict_proba_batch(&m, s.x_valid.view())?)
        };
        let mut diagnostics = set.diagnostics.clone();
        let ar = approval_rate(&test, &valid, &s.y_valid, cfg.budget)?;
        diagnostics.extend(ar.diagnostic.clone());
        let kk = match kickout(&base_accepts, &lowest(&test, volume), &s.y_test) {
            Ok(v) => Some(v),
            Err(e) => {
                diagnostics.push(e.to_string());
                None
            }
        };
        rows.push(RiRow {
            strategy: *strategy,
            auc: auc(&test, &s.y_test)?,
            balanced_accuracy: balanced_accuracy(&threshold_predictions(&test, 0.5), &s.y_test)?,
            approval_rate: ar.rate,
            kickout: kk,
            train_rows: set.len(),
            diagnostics,
        });
    }
    Ok(rows)
}

/// Builds every requested strategy's training set and evaluates them.
pub fn run_ri(s: &RejectScenario, strategies: &[Strategy], cfg: &RiConfig) -> Result<Vec<RiRow>> {
    let base = fit_final(s, &AugmentedTrainingSet::accepted_only(s), cfg)?;
    let sets = strategies
        .iter()
        .map(|&k| Ok((k, build_training_set(s, k, cfg, &base)?)))
        .collect::<Result<Vec<_>>>()?;
    evaluate_ri(s, &sets, cfg)
}
