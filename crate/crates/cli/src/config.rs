//! JSON experiment configuration.
//!
//! Every section except `dataset` is optional. Unknown keys anywhere are rejected.
//! A minimal benchmark config:
//!
//! ```json
//! {
//!   "dataset": "german",
//!   "models": [{ "family": "logistic" }],
//!   "tuning": { "n_trials": 50 }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use credit_core::explain::{
    CounterfactualConfig, DiverseConfig, IceConfig, ImportanceConfig, LimeConfig, ShapConfig, ShapMode,
};
use credit_core::learners::Family;
use credit_core::mitigation::{ParamDist, SearchSpace, ThresholdMode};
use credit_core::reject::{RiConfig, ScenarioConfig, Strategy};
use credit_core::tabular::{resolve_data_dir, DatasetProfile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Profile name, read from `<profile_dir>/<dataset>.profile`.
    pub dataset: String,
    #[serde(default = "default_profile_dir")]
    pub profile_dir: PathBuf,
    /// Falls back to `CREDIT_DATA_DIR`, then `./data`.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    /// Defaults to `runs/<dataset>`.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Root seed; every random component draws a named substream of it.
    #[serde(default)]
    pub seed: u64,
    /// Include the sensitive attribute as a model input.
    #[serde(default)]
    pub aware: bool,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default = "default_models")]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default)]
    pub fairness: FairnessConfig,
    #[serde(default)]
    pub reject: RejectConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Train, validation and test fractions.
    pub fractions: [f64; 3],
    /// Train/validation re-draws around one fixed test set.
    pub n_folds: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            fractions: [0.8, 0.1, 0.1],
            n_folds: 10,
        }
    }
}

/// A learner with either a search space or fixed parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    /// Fixed parameters; sampled parameters take precedence.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// `None` uses the family's default space; an empty map disables tuning.
    #[serde(default)]
    pub space: Option<SearchSpace>,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            params: BTreeMap::new(),
            space: None,
        }
    }

    pub fn search_space(&self) -> SearchSpace {
        self.space.clone().unwrap_or_else(|| default_space(self.family))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    pub n_trials: usize,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self { n_trials: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mitigation {
    Reweighing,
    DpClassifier,
    EoClassifier,
    Fairgbm,
    ThresholdOptimizer,
}

impl Mitigation {
    pub const ALL: [Mitigation; 5] = [
        Mitigation::Reweighing,
        Mitigation::DpClassifier,
        Mitigation::EoClassifier,
        Mitigation::Fairgbm,
        Mitigation::ThresholdOptimizer,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FairnessConfig {
    /// Mitigations to run next to the unaware and aware baselines.
    pub mitigations: Vec<Mitigation>,
    /// Families trained with reweighing.
    pub reweigh_families: Vec<Family>,
    /// Trials for tuning the mitigation strength; defaults to `tuning.n_trials`.
    pub n_trials: Option<usize>,
    /// Fairness goal on EOD; defaults to the profile's `f_star`, else 0.05.
    pub f_star: Option<f64>,
    /// Penalty per unit of EOD above the goal.
    pub penalty: f64,
    /// Covariance caps searched for the constrained logistic models.
    pub covariance_space: ParamDist,
    pub fairgbm_epsilon_space: ParamDist,
    pub fairgbm_step_space: ParamDist,
    pub threshold_mode: ThresholdMode,
}

impl Default for FairnessConfig {
    fn default() -> Self {
        Self {
            mitigations: Mitigation::ALL.to_vec(),
            reweigh_families: vec![Family::Logistic, Family::Boost],
            n_trials: None,
            f_star: None,
            penalty: 100.0,
            covariance_space: ParamDist::LogUniform { low: 1e-4, high: 1.0 },
            fairgbm_epsilon_space: ParamDist::Uniform { low: 0.0, high: 0.05 },
            fairgbm_step_space: ParamDist::LogUniform { low: 0.01, high: 2.0 },
            threshold_mode: ThresholdMode::EqualOpportunity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RejectConfig {
    pub seeds: Vec<u64>,
    pub strategies: Vec<Strategy>,
    /// Policy threshold; defaults to the profile's `reject_threshold`, else 0.4.
    pub threshold: Option<f64>,
    /// Scenario settings; `threshold`, `seed` and empty `policy_features` are
    /// filled from the fields above and the profile.
    pub scenario: ScenarioConfig,
    pub ri: RiConfig,
}

impl Default for RejectConfig {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            strategies: Strategy::ALL.to_vec(),
            threshold: None,
            scenario: ScenarioConfig::default(),
            ri: RiConfig::default(),
        }
    }
}

/// Which test row gets local explanations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSelector {
    /// First test applicant who defaulted but was approved.
    FirstMisclassifiedDefault,
    /// First test applicant the model denies.
    FirstDenied,
    /// Position within the test rows.
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Model explained; its space is tuned like in `benchmark` unless empty.
    pub model: ModelSpec,
    /// Saved model written by `benchmark`; replaces fitting when set.
    pub artifact: Option<PathBuf>,
    pub fold: usize,
    /// Features for PD and ICE curves; empty picks the first three numeric inputs.
    pub curve_features: Vec<String>,
    pub grid_size: usize,
    pub ice: IceConfig,
    /// ICE lines are colored by this feature when set.
    pub color_by: Option<String>,
    pub rows: RowSelector,
    pub counterfactual_row: RowSelector,
    pub n_background: usize,
    /// Local Shapley values; permutation sampling by default since exact
    /// enumeration is limited to few inputs.
    pub shap: ShapConfig,
    pub lime: LimeConfig,
    pub importance: ImportanceConfig,
    /// Features counterfactuals may change; empty means every numeric input and
    /// binary categorical that is neither protected nor listed under the profile key
    /// `immutable`.
    pub mutable: Vec<String>,
    pub counterfactual: CounterfactualConfig,
    pub diverse: DiverseConfig,
    /// Models whose importances and curves `plot-data` emits.
    pub plot_families: Vec<Family>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::new(Family::Logistic),
            artifact: None,
            fold: 0,
            curve_features: Vec::new(),
            grid_size: 20,
            ice: IceConfig {
                max_rows: Some(100),
                ..IceConfig::default()
            },
            color_by: None,
            rows: RowSelector::FirstMisclassifiedDefault,
            counterfactual_row: RowSelector::FirstDenied,
            n_background: 100,
            shap: ShapConfig {
                mode: ShapMode::Permutation,
                ..ShapConfig::default()
            },
            lime: LimeConfig::default(),
            importance: ImportanceConfig::default(),
            mutable: Vec::new(),
            counterfactual: CounterfactualConfig::default(),
            diverse: DiverseConfig::default(),
            plot_families: vec![Family::Logistic, Family::Boost],
        }
    }
}

fn default_profile_dir() -> PathBuf {
    PathBuf::from("profiles")
}

fn one() -> usize {
    1
}

fn default_models() -> Vec<ModelSpec> {
    Family::ALL.into_iter().map(ModelSpec::new).collect()
}

/// Search space used when a model lists none.
pub fn default_space(family: Family) -> SearchSpace {
    use ParamDist::*;
    let entries: Vec<(&str, ParamDist)> = match family {
        Family::Logistic => vec![("reg", LogUniform { low: 1e-3, high: 100.0 })],
        Family::Tree => vec![
            ("max_depth", Int { low: 2, high: 10 }),
            ("min_samples_leaf", Int { low: 1, high: 50 }),
        ],
        Family::Forest => vec![
            ("n_trees", Int { low: 50, high: 200 }),
            ("max_depth", Int { low: 3, high: 12 }),
            ("min_samples_leaf", Int { low: 1, high: 20 }),
            ("feature_subsample", Uniform { low: 0.2, high: 0.8 }),
        ],
        Family::Boost => vec![
            ("n_trees", Int { low: 50, high: 300 }),
            ("learning_rate", LogUniform { low: 0.01, high: 0.3 }),
            ("max_depth", Int { low: 2, high: 6 }),
            ("min_child_weight", LogUniform { low: 1e-3, high: 10.0 }),
            ("lambda", LogUniform { low: 1e-3, high: 10.0 }),
            ("subsample", Uniform { low: 0.5, high: 1.0 }),
            ("feature_subsample", Uniform { low: 0.5, high: 1.0 }),
        ],
    };
    entries.into_iter().map(|(k, d)| (k.to_string(), d)).collect()
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub aware: bool,
    pub trials: Option<usize>,
}

impl ExperimentConfig {
    /// Config for `dataset` with every default.
    pub fn for_dataset(dataset: &str) -> Self {
        serde_json::from_value(serde_json::json!({ "dataset": dataset })).expect("defaults deserialize")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.data_dir {
            self.data_dir = Some(d.clone());
        }
        if let Some(d) = &o.out {
            self.out = Some(d.clone());
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if o.aware {
            self.aware = true;
        }
        if let Some(t) = o.trials {
            self.tuning.n_trials = t;
        }
    }

    /// Checks every section; called before any data is read.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.dataset.trim().is_empty() {
            return bad("dataset must not be empty".into());
        }
        let f = self.split.fractions;
        if f.iter().any(|v| !(*v > 0.0)) || ((f[0] + f[1] + f[2]) - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions must be positive and sum to 1, got {f:?}"));
        }
        if self.split.n_folds == 0 {
            return bad("split.n_folds must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.tuning.n_trials == 0 || self.fairness.n_trials == Some(0) {
            return bad("n_trials must be at least 1".into());
        }
        if self.models.is_empty() {
            return bad("models must not be empty".into());
        }
        let mut seen = Vec::new();
        for m in self.models.iter().chain(std::iter::once(&self.explain.model)) {
            check_model(m)?;
            if !std::ptr::eq(m, &self.explain.model) {
                if seen.contains(&m.family) {
                    return bad(format!("model family {} listed twice", m.family));
                }
                seen.push(m.family);
            }
        }
        let fc = &self.fairness;
        for (name, d) in [
            ("covariance_space", &fc.covariance_space),
            ("fairgbm_epsilon_space", &fc.fairgbm_epsilon_space),
            ("fairgbm_step_space", &fc.fairgbm_step_space),
        ] {
            d.check(name).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if fc.f_star.is_some_and(|v| !(v >= 0.0)) || !(fc.penalty >= 0.0) {
            return bad("fairness f_star and penalty must be non-negative".into());
        }
        if self.reject.seeds.is_empty() || self.reject.strategies.is_empty() {
            return bad("reject needs at least one seed and one strategy".into());
        }
        if self.reject.threshold.is_some_and(|t| !(0.0..=1.0).contains(&t)) {
            return bad("reject threshold must lie in [0, 1]".into());
        }
        if self.explain.fold >= self.split.n_folds {
            return bad(format!("explain.fold {} out of range", self.explain.fold));
        }
        if self.explain.grid_size == 0 || self.explain.n_background == 0 {
            return bad("explain grid_size and n_background must be positive".into());
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(&self.dataset))
    }

    pub fn data_dir(&self) -> PathBuf {
        resolve_data_dir(self.data_dir.as_deref())
    }

    pub fn profile_path(&self) -> PathBuf {
        self.profile_dir.join(format!("{}.profile", self.dataset))
    }

    pub fn profile(&self) -> Result<DatasetProfile> {
        let path = self.profile_path();
        if !path.exists() {
            return Err(CliError::Config(format!("no profile for dataset {:?} at {}", self.dataset, path.display())));
        }
        Ok(DatasetProfile::from_file(&path)?)
    }

    /// SHA-256 of the canonical JSON of everything that affects results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 1;
        c.out = None;
        c.data_dir = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn check_model(m: &ModelSpec) -> Result<()> {
    let allowed = m.family.param_names();
    let space = m.search_space();
    for k in m.params.keys().chain(space.keys()) {
        if !allowed.contains(&k.as_str()) {
            return Err(CliError::Config(format!(
                "unknown parameter {k} for {}; expected one of {allowed:?}",
                m.family
            )));
        }
    }
    for (k, d) in &space {
        d.check(k).map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}
