//! Model explanations computed in original feature space.
//!
//! Every explainer sees the preprocessing plan and the model as one opaque
//! [`Scorer`]: rows hold raw numeric values and categorical vocabulary indices
//! (see [`PreprocessPlan::to_original`]), never encoded columns.

mod counterfactual;
mod curves;
mod importance;
mod lime;
mod shap;

pub use counterfactual::{
    action_grids, counterfactual_search, diverse_counterfactuals, pareto_front, relative_change, ActionGrid,
    Change, Counterfactual, CounterfactualConfig, CounterfactualSet, DiverseConfig,
};
pub use curves::{ice, numeric_grid, partial_dependence, CurveSet, IceConfig};
pub use importance::{global_importance, mean_abs_shap, FeatureImportance, ImportanceConfig, ImportanceKind};
pub use lime::{lime_local, LimeConfig, LimeExplanation};
pub use shap::{background_sample, shap_values, Attribution, ShapConfig, ShapMode, EXACT_MAX_FEATURES};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::learners::Predictor;
use crate::tabular::{ColumnPlan, PreprocessPlan};
use crate::{Error, Result};

/// Scale of a scorer's output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scale", rename_all = "snake_case")]
pub enum OutputScale {
    Probability,
    /// Log-odds of the probability.
    LogOdds,
    /// `1` iff the probability reaches the threshold.
    Label { threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Numeric,
    /// Values are level indices `0..levels`.
    Categorical { levels: usize },
}

/// A model over original-space rows.
pub trait Scorer {
    fn n_inputs(&self) -> usize;

    fn score(&self, row: &[f64]) -> f64;

    fn feature_name(&self, j: usize) -> String {
        format!("x{j}")
    }

    fn feature_kind(&self, _j: usize) -> FeatureKind {
        FeatureKind::Numeric
    }

    /// Level names of a categorical input.
    fn level_names(&self, _j: usize) -> Option<Vec<String>> {
        None
    }

    /// Inputs that explanations may never propose to change.
    fn is_immutable(&self, _j: usize) -> bool {
        false
    }

    /// Exact change in the log-odds from setting input `j` of `row` to `value`, when
    /// the log-odds are additive over inputs.
    fn margin_delta(&self, _row: &[f64], _j: usize, _value: f64) -> Option<f64> {
        None
    }

    fn scale(&self) -> OutputScale {
        OutputScale::Probability
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn n_inputs(&self) -> usize {
        (**self).n_inputs()
    }
    fn score(&self, row: &[f64]) -> f64 {
        (**self).score(row)
    }
    fn feature_name(&self, j: usize) -> String {
        (**self).feature_name(j)
    }
    fn feature_kind(&self, j: usize) -> FeatureKind {
        (**self).feature_kind(j)
    }
    fn level_names(&self, j: usize) -> Option<Vec<String>> {
        (**self).level_names(j)
    }
    fn is_immutable(&self, j: usize) -> bool {
        (**self).is_immutable(j)
    }
    fn margin_delta(&self, row: &[f64], j: usize, value: f64) -> Option<f64> {
        (**self).margin_delta(row, j, value)
    }
    fn scale(&self) -> OutputScale {
        (**self).scale()
    }
}

/// Preprocessing plan followed by a fitted model.
#[derive(Debug, Clone, Copy)]
pub struct Pipeline<'a, P: ?Sized> {
    pub plan: &'a PreprocessPlan,
    pub model: &'a P,
    pub scale: OutputScale,
}

impl<'a, P: Predictor + ?Sized> Pipeline<'a, P> {
    pub fn new(plan: &'a PreprocessPlan, model: &'a P) -> Result<Self> {
        if plan.n_outputs() != model.n_features() {
            return Err(Error::DimensionMismatch {
                expected: model.n_features(),
                actual: plan.n_outputs(),
            });
        }
        Ok(Self {
            plan,
            model,
            scale: OutputScale::Probability,
        })
    }

    pub fn with_scale(mut self, scale: OutputScale) -> Self {
        self.scale = scale;
        self
    }

    fn encode(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.plan.n_outputs()];
        self.plan.encode_original_row(row, &mut out);
        out
    }
}

impl<P: Predictor + ?Sized> Scorer for Pipeline<'_, P> {
    fn n_inputs(&self) -> usize {
        self.plan.n_inputs()
    }

    fn score(&self, row: &[f64]) -> f64 {
        let enc = self.encode(row);
        match self.scale {
            OutputScale::Probability => self.model.predict_proba_row(&enc),
            OutputScale::LogOdds => match self.model.linear_margin() {
                Some((coef, b)) => b + coef.iter().zip(&enc).map(|(c, x)| c * x).sum::<f64>(),
                None => {
                    let p = self.model.predict_proba_row(&enc).clamp(1e-15, 1.0 - 1e-15);
                    (p / (1.0 - p)).ln()
                }
            },
            OutputScale::Label { threshold } => f64::from(self.model.predict(&enc, threshold)),
        }
    }

    fn feature_name(&self, j: usize) -> String {
        self.plan.input_names()[j].clone()
    }

    fn feature_kind(&self, j: usize) -> FeatureKind {
        match self.plan.columns.get(j) {
            Some(ColumnPlan::Numeric { .. }) => FeatureKind::Numeric,
            Some(ColumnPlan::Categorical { vocab, .. }) => FeatureKind::Categorical { levels: vocab.len() },
            None => FeatureKind::Categorical { levels: 2 },
        }
    }

    fn level_names(&self, j: usize) -> Option<Vec<String>> {
        match self.plan.columns.get(j) {
            Some(ColumnPlan::Numeric { .. }) => None,
            Some(ColumnPlan::Categorical { vocab, .. }) => Some(vocab.clone()),
            None => Some(vec!["0".into(), "1".into()]),
        }
    }

    fn is_immutable(&self, j: usize) -> bool {
        self.plan.sensitive_input() == Some(j)
    }

    fn margin_delta(&self, row: &[f64], j: usize, value: f64) -> Option<f64> {
        let (coef, _) = self.model.linear_margin()?;
        let before = self.encode(row);
        let mut moved = row.to_vec();
        moved[j] = value;
        let after = self.encode(&moved);
        Some(coef.iter().zip(before.iter().zip(&after)).map(|(c, (a, b))| c * (b - a)).sum())
    }

    fn scale(&self) -> OutputScale {
        self.scale
    }
}

/// A closure over numeric inputs, mostly for tests and synthetic games.
pub struct FnScorer<F> {
    pub n_inputs: usize,
    pub f: F,
    /// Kind per input; empty means all numeric.
    pub kinds: Vec<FeatureKind>,
}

impl<F: Fn(&[f64]) -> f64> FnScorer<F> {
    pub fn new(n_inputs: usize, f: F) -> Self {
        Self {
            n_inputs,
            f,
            kinds: Vec::new(),
        }
    }

    pub fn with_kinds(mut self, kinds: Vec<FeatureKind>) -> Self {
        self.kinds = kinds;
        self
    }
}

impl<F: Fn(&[f64]) -> f64> Scorer for FnScorer<F> {
    fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    fn score(&self, row: &[f64]) -> f64 {
        (self.f)(row)
    }

    fn feature_kind(&self, j: usize) -> FeatureKind {
        self.kinds.get(j).copied().unwrap_or(FeatureKind::Numeric)
    }
}

pub(crate) fn check_width<S: Scorer + ?Sized>(s: &S, width: usize) -> Result<()> {
    if width != s.n_inputs() {
        return Err(Error::DimensionMismatch {
            expected: s.n_inputs(),
            actual: width,
        });
    }
    Ok(())
}

pub(crate) fn check_data<S: Scorer + ?Sized>(s: &S, data: ArrayView2<f64>) -> Result<()> {
    check_width(s, data.ncols())?;
    if data.nrows() == 0 {
        return Err(Error::invalid("explanation data is empty"));
    }
    Ok(())
}

pub(crate) fn check_feature<S: Scorer + ?Sized>(s: &S, j: usize) -> Result<()> {
    if j >= s.n_inputs() {
        return Err(Error::invalid(format!(
            "feature index {j} out of range for {} inputs",
            s.n_inputs()
        )));
    }
    Ok(())
}

/// Non-missing values of column `j`.
pub(crate) fn observed(data: ArrayView2<f64>, j: usize) -> Vec<f64> {
    data.column(j).iter().copied().filter(|v| !v.is_nan()).collect()
}

/// Population mean and standard deviation of the observed values of column `j`.
pub(crate) fn column_moments(data: ArrayView2<f64>, j: usize) -> (f64, f64) {
    let v = observed(data, j);
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Spearman correlation of two importance vectors by absolute value, average ranks
/// on ties. `None` when either side is constant.
pub fn rank_agreement(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| abs[i].total_cmp(&abs[j]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}
