//! Fitting a learner family from a flat parameter map, as produced by tuning.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{
    fit_boost, fit_forest, fit_logistic, fit_tree, BoostConfig, ForestConfig, LogisticConfig,
    Model, TreeConfig, TreeTarget,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    Tree,
    Forest,
    Boost,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Logistic, Family::Tree, Family::Forest, Family::Boost];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::Tree => "tree",
            Family::Forest => "forest",
            Family::Boost => "boost",
        }
    }

    /// Parameter names accepted by [`fit_family`].
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Family::Logistic => &["reg"],
            Family::Tree => &["max_depth", "min_samples_leaf"],
            Family::Forest => &["n_trees", "max_depth", "min_samples_leaf", "feature_subsample"],
            Family::Boost => &[
                "n_trees",
                "learning_rate",
                "max_depth",
                "min_samples_leaf",
                "min_child_weight",
                "lambda",
                "subsample",
                "feature_subsample",
            ],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model family {s:?}")))
    }
}

fn count(params: &BTreeMap<String, f64>, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(&v) if v >= 0.0 && v.fract() == 0.0 && v.is_finite() => Ok(v as usize),
        Some(v) => Err(Error::invalid(format!("parameter {key} must be a non-negative integer, got {v}"))),
    }
}

/// Boosting settings from a flat parameter map, defaults for absent keys.
pub fn boost_config(params: &BTreeMap<String, f64>, seed: u64) -> Result<BoostConfig> {
    let real = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
    let d = BoostConfig::default();
    Ok(BoostConfig {
        n_trees: count(params, "n_trees", d.n_trees)?,
        learning_rate: real("learning_rate", d.learning_rate),
        max_depth: count(params, "max_depth", d.max_depth)?,
        min_samples_leaf: count(params, "min_samples_leaf", d.min_samples_leaf)?,
        min_child_weight: real("min_child_weight", d.min_child_weight),
        lambda: real("lambda", d.lambda),
        subsample: real("subsample", d.subsample),
        feature_subsample: real("feature_subsample", d.feature_subsample),
        seed,
        ..d
    })
}

/// Fits `family` with `params` overriding its defaults; `seed` drives any randomness.
pub fn fit_family(
    family: Family,
    params: &BTreeMap<String, f64>,
    x: ArrayView2<f64>,
    y: &[u8],
    w: &[f64],
    seed: u64,
) -> Result<Model> {
    if let Some(k) = params.keys().find(|k| !family.param_names().contains(&k.as_str())) {
        return Err(Error::invalid(format!("unknown parameter {k} for {family}")));
    }
    let real = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
    match family {
        Family::Logistic => {
            let cfg = LogisticConfig {
                reg: real("reg", LogisticConfig::default().reg),
                ..Default::default()
            };
            Ok(Model::Logistic(fit_logistic(x, y, w, &cfg)?))
        }
        Family::Tree => {
            let d = TreeConfig::default();
            let cfg = TreeConfig {
                max_depth: count(params, "max_depth", d.max_depth)?,
                min_samples_leaf: count(params, "min_samples_leaf", d.min_samples_leaf)?,
                ..d
            };
            Ok(Model::Tree(fit_tree(x, TreeTarget::Classification(y), w, &cfg)?))
        }
        Family::Forest => {
            let d = ForestConfig::default();
            let cfg = ForestConfig {
                n_trees: count(params, "n_trees", d.n_trees)?,
                max_depth: count(params, "max_depth", d.max_depth)?,
                min_samples_leaf: count(params, "min_samples_leaf", d.min_samples_leaf)?,
                feature_subsample: real("feature_subsample", d.feature_subsample),
                seed,
                ..d
            };
            Ok(Model::Forest(fit_forest(x, y, w, &cfg)?))
        }
        Family::Boost => Ok(Model::Boost(fit_boost(x, y, w, &boost_config(params, seed)?)?)),
    }
}
