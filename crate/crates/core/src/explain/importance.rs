//! Global feature rankings aggregated to source features.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::shap::{shap_values, ShapConfig, ShapMode};
use super::{check_data, OutputScale, Pipeline, Scorer};
use crate::learners::Model;
use crate::tabular::PreprocessPlan;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceKind {
    /// Absolute logistic coefficients (logistic models only).
    LrCoefficients,
    /// Number of splits per feature (tree models only).
    SplitCounts,
    /// Mean absolute Shapley value of the thresholded label over the background.
    MeanAbsShap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    /// Non-negative magnitude used for ranking.
    pub importance: f64,
    /// Signed value, when the kind has a sign for this feature.
    pub signed: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceConfig {
    /// Threshold turning probabilities into labels for Shapley aggregation.
    pub threshold: f64,
    pub shap: ShapConfig,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            shap: ShapConfig {
                mode: ShapMode::Permutation,
                n_permutations: 10,
                seed: 0,
            },
        }
    }
}

/// Ranked importances, largest first; ties keep input order. `background` is in
/// original space and is only used by [`ImportanceKind::MeanAbsShap`].
pub fn global_importance(
    plan: &PreprocessPlan,
    model: &Model,
    kind: ImportanceKind,
    background: ArrayView2<f64>,
    cfg: &ImportanceConfig,
) -> Result<Vec<FeatureImportance>> {
    let names = plan.input_names();
    let sources = plan.column_sources();
    let mut out: Vec<FeatureImportance> = match kind {
        ImportanceKind::LrCoefficients => {
            let Model::Logistic(m) = model else {
                return Err(Error::invalid(format!(
                    "coefficient importance needs a logistic model, got {}",
                    model.family()
                )));
            };
            let mut sum_abs = vec![0.0; names.len()];
            let mut width = vec![0usize; names.len()];
            let mut signed = vec![0.0; names.len()];
            for (&src, &b) in sources.iter().zip(&m.coef) {
                sum_abs[src] += b.abs();
                width[src] += 1;
                signed[src] = b;
            }
            names
                .iter()
                .enumerate()
                .map(|(j, n)| FeatureImportance {
                    feature: n.clone(),
                    importance: sum_abs[j],
                    signed: (width[j] == 1).then_some(signed[j]),
                })
                .collect()
        }
        ImportanceKind::SplitCounts => {
            let counts = match model {
                Model::Tree(t) => t.split_counts(),
                Model::Boost(b) => b.split_counts(),
                Model::Forest(f) => {
                    let mut c = vec![0; sources.len()];
                    for t in &f.trees {
                        c.iter_mut().zip(t.split_counts()).for_each(|(a, b)| *a += b);
                    }
                    c
                }
                Model::Logistic(_) => {
                    return Err(Error::invalid("split-count importance needs a tree model, got logistic"))
                }
            };
            let mut agg = vec![0usize; names.len()];
            for (&src, c) in sources.iter().zip(counts) {
                agg[src] += c;
            }
            names
                .iter()
                .zip(agg)
                .map(|(n, c)| FeatureImportance {
                    feature: n.clone(),
                    importance: c as f64,
                    signed: None,
                })
                .collect()
        }
        ImportanceKind::MeanAbsShap => {
            let s = Pipeline::new(plan, model)?.with_scale(OutputScale::Label {
                threshold: cfg.threshold,
            });
            mean_abs_shap(&s, background, &cfg.shap)?
                .into_iter()
                .zip(&names)
                .map(|(v, n)| FeatureImportance {
                    feature: n.clone(),
                    importance: v,
                    signed: None,
                })
                .collect()
        }
    };
    out.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    Ok(out)
}

/// Mean absolute Shapley value per input, explaining every background row against
/// the background itself.
pub fn mean_abs_shap<S: Scorer + ?Sized>(s: &S, background: ArrayView2<f64>, cfg: &ShapConfig) -> Result<Vec<f64>> {
    check_data(s, background)?;
    let mut acc = vec![0.0; s.n_inputs()];
    for row in background.rows() {
        let a = shap_values(s, &row.to_vec(), background, cfg)?;
        acc.iter_mut().zip(&a.contributions).for_each(|(t, c)| *t += c.abs());
    }
    acc.iter_mut().for_each(|t| *t /= background.nrows() as f64);
    Ok(acc)
}
