//! Imputation, standardization and one-hot encoding fitted on a single split.
//!
//! Besides the encoded design matrix, a plan defines an *original space*: one real
//! per source feature, holding the raw numeric value or the vocabulary index of a
//! categorical value (`NaN` = missing). Explanations work in that space and go through
//! [`PreprocessPlan::encode_original_row`] to reach the model.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::table::{ColumnData, Table};
use super::{ColumnKind, ColumnSpec};
use crate::{Error, Result};

/// Name of the reserved bucket for categories unseen at fit time.
pub const OTHER: &str = "OTHER";

pub const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnPlan {
    Numeric {
        name: String,
        impute: f64,
        mean: f64,
        std: f64,
    },
    Categorical {
        name: String,
        impute: String,
        /// Categories seen in the fit split, sorted; `OTHER` is implicit at the end.
        vocab: Vec<String>,
        /// Relative frequency of each vocabulary entry (after imputation), `OTHER` last.
        frequencies: Vec<f64>,
    },
}

impl ColumnPlan {
    pub fn name(&self) -> &str {
        match self {
            ColumnPlan::Numeric { name, .. } | ColumnPlan::Categorical { name, .. } => name,
        }
    }

    /// Number of encoded columns this source column expands to.
    pub fn width(&self) -> usize {
        match self {
            ColumnPlan::Numeric { .. } => 1,
            ColumnPlan::Categorical { vocab, .. } => vocab.len() + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessPlan {
    pub columns: Vec<ColumnPlan>,
    /// Feature specs of the table the plan was fitted on, in order.
    pub source_schema: Vec<ColumnSpec>,
    /// Append the binary sensitive indicator as a final, unscaled column ("aware").
    pub include_sensitive: bool,
    pub fitted: bool,
}

/// Encoded design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: Array2<f64>,
    pub names: Vec<String>,
    /// For each encoded column, the index of its source input.
    pub sources: Vec<usize>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Fits imputation values, scaling statistics and vocabularies on `train` only.
pub fn fit_preprocess(train: &Table, include_sensitive: bool) -> Result<PreprocessPlan> {
    if train.n_rows() == 0 {
        return Err(Error::invalid("cannot fit preprocessing on an empty table"));
    }
    if include_sensitive && train.sensitive().is_none() {
        return Err(Error::Schema(
            "aware preprocessing requested but the table has no sensitive column".into(),
        ));
    }
    let mut columns = Vec::with_capacity(train.features().len());
    for col in train.features() {
        let name = col.spec.name.clone();
        let plan = match &col.data {
            ColumnData::Numeric(values) => {
                let mut present: Vec<f64> = values.iter().flatten().copied().collect();
                if present.is_empty() {
                    return Err(Error::Schema(format!(
                        "numeric column {name:?} is entirely missing in the fit split"
                    )));
                }
                present.sort_by(f64::total_cmp);
                let impute = median(&present);
                let imputed: Vec<f64> = values.iter().map(|v| v.unwrap_or(impute)).collect();
                let lo = imputed.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = imputed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (mean, std) = if lo == hi {
                    (lo, MIN_STD)
                } else {
                    let n = imputed.len() as f64;
                    let mean = imputed.iter().sum::<f64>() / n;
                    let var = imputed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    (mean, var.sqrt().max(MIN_STD))
                };
                ColumnPlan::Numeric {
                    name,
                    impute,
                    mean,
                    std,
                }
            }
            ColumnData::Categorical(values) => {
                let mut counts = std::collections::BTreeMap::<&str, usize>::new();
                for v in values.iter().flatten() {
                    *counts.entry(v.as_str()).or_default() += 1;
                }
                // mode, ties broken toward the lexicographically smallest category
                let impute = counts
                    .iter()
                    .fold(None::<(&str, usize)>, |best, (&k, &c)| match best {
                        Some((_, bc)) if bc >= c => best,
                        _ => Some((k, c)),
                    })
                    .map(|(k, _)| k.to_string())
                    .unwrap_or_else(|| OTHER.to_string());
                let missing = values.iter().filter(|v| v.is_none()).count();
                let vocab: Vec<String> = counts.keys().map(|k| k.to_string()).collect();
                let n = values.len() as f64;
                let mut frequencies: Vec<f64> = vocab
                    .iter()
                    .map(|k| {
                        let extra = if *k == impute { missing } else { 0 };
                        (counts[k.as_str()] + extra) as f64 / n
                    })
                    .collect();
                frequencies.push(if vocab.is_empty() { 1.0 } else { 0.0 });
                ColumnPlan::Categorical {
                    name,
                    impute,
                    vocab,
                    frequencies,
                }
            }
        };
        columns.push(plan);
    }
    Ok(PreprocessPlan {
        columns,
        source_schema: train.features().iter().map(|c| c.spec.clone()).collect(),
        include_sensitive,
        fitted: true,
    })
}

/// Encodes `t` with a fitted plan.
pub fn apply_preprocess(plan: &PreprocessPlan, t: &Table) -> Result<Design> {
    let original = plan.to_original(t)?;
    let n = t.n_rows();
    let width = plan.n_outputs();
    let mut x = Array2::<f64>::zeros((n, width));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        let orig = original.row(i);
        plan.encode_original_row(
            orig.as_slice().expect("standard layout"),
            row.as_slice_mut().expect("standard layout"),
        );
    }
    Ok(Design {
        x,
        names: plan.output_names(),
        sources: plan.column_sources(),
    })
}

impl PreprocessPlan {
    /// Number of source inputs in original space (features, plus the sensitive
    /// indicator when aware).
    pub fn n_inputs(&self) -> usize {
        self.columns.len() + usize::from(self.include_sensitive)
    }

    pub fn n_outputs(&self) -> usize {
        self.columns.iter().map(ColumnPlan::width).sum::<usize>()
            + usize::from(self.include_sensitive)
    }

    pub fn input_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.columns.iter().map(|c| c.name().to_string()).collect();
        if self.include_sensitive {
            names.push("sensitive".into());
        }
        names
    }

    /// Index of the sensitive indicator in the encoded design, when aware.
    pub fn sensitive_output(&self) -> Option<usize> {
        self.include_sensitive.then(|| self.n_outputs() - 1)
    }

    pub fn sensitive_input(&self) -> Option<usize> {
        self.include_sensitive.then_some(self.columns.len())
    }

    pub fn output_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_outputs());
        for col in &self.columns {
            match col {
                ColumnPlan::Numeric { name, .. } => names.push(name.clone()),
                ColumnPlan::Categorical { name, vocab, .. } => {
                    names.extend(vocab.iter().map(|v| format!("{name}={v}")));
                    names.push(format!("{name}={OTHER}"));
                }
            }
        }
        if self.include_sensitive {
            names.push("sensitive".into());
        }
        names
    }

    pub fn column_sources(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_outputs());
        for (j, col) in self.columns.iter().enumerate() {
            out.extend(std::iter::repeat_n(j, col.width()));
        }
        if self.include_sensitive {
            out.push(self.columns.len());
        }
        out
    }

    fn check_schema(&self, t: &Table) -> Result<()> {
        let specs: Vec<&ColumnSpec> = t.features().iter().map(|c| &c.spec).collect();
        if specs.len() != self.source_schema.len()
            || specs
                .iter()
                .zip(&self.source_schema)
                .any(|(a, b)| a.name != b.name || a.kind != b.kind)
        {
            return Err(Error::Schema(
                "table schema does not match the preprocessing plan".into(),
            ));
        }
        if self.include_sensitive && t.sensitive().is_none() {
            return Err(Error::Schema(
                "aware plan applied to a table without a sensitive column".into(),
            ));
        }
        Ok(())
    }

    /// Original-space matrix: raw numeric values and categorical vocabulary indices,
    /// unseen categories mapped to `OTHER`, missing values as `NaN`.
    pub fn to_original(&self, t: &Table) -> Result<Array2<f64>> {
        self.check_schema(t)?;
        let n = t.n_rows();
        let mut out = Array2::<f64>::from_elem((n, self.n_inputs()), f64::NAN);
        for (j, (plan, col)) in self.columns.iter().zip(t.features()).enumerate() {
            match (plan, &col.data) {
                (ColumnPlan::Numeric { .. }, ColumnData::Numeric(values)) => {
                    for (i, v) in values.iter().enumerate() {
                        if let Some(v) = v {
                            out[[i, j]] = *v;
                        }
                    }
                }
                (ColumnPlan::Categorical { vocab, .. }, ColumnData::Categorical(values)) => {
                    for (i, v) in values.iter().enumerate() {
                        if let Some(v) = v {
                            let code = vocab
                                .binary_search_by(|probe| probe.as_str().cmp(v.as_str()))
                                .unwrap_or(vocab.len());
                            out[[i, j]] = code as f64;
                        }
                    }
                }
                _ => unreachable!("schema checked"),
            }
        }
        if self.include_sensitive {
            let z = t.sensitive().expect("checked");
            let j = self.columns.len();
            for (i, &v) in z.iter().enumerate() {
                out[[i, j]] = f64::from(v);
            }
        }
        Ok(out)
    }

    /// Encodes one original-space row into `out` (length [`Self::n_outputs`]).
    pub fn encode_original_row(&self, orig: &[f64], out: &mut [f64]) {
        debug_assert_eq!(orig.len(), self.n_inputs());
        debug_assert_eq!(out.len(), self.n_outputs());
        let mut k = 0;
        for (j, col) in self.columns.iter().enumerate() {
            match col {
                ColumnPlan::Numeric {
                    impute, mean, std, ..
                } => {
                    let v = if orig[j].is_nan() { *impute } else { orig[j] };
                    out[k] = (v - mean) / std;
                    k += 1;
                }
                ColumnPlan::Categorical { impute, vocab, .. } => {
                    let width = vocab.len() + 1;
                    let code = if orig[j].is_nan() {
                        vocab
                            .binary_search_by(|probe| probe.as_str().cmp(impute.as_str()))
                            .unwrap_or(vocab.len())
                    } else {
                        (orig[j].max(0.0) as usize).min(vocab.len())
                    };
                    out[k..k + width].fill(0.0);
                    out[k + code] = 1.0;
                    k += width;
                }
            }
        }
        if self.include_sensitive {
            out[k] = orig[self.columns.len()];
        }
    }

    /// Stable content hash, recorded alongside saved models.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("plan serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn column(&self, name: &str) -> Option<&ColumnPlan> {
        self.columns.iter().find(|c| c.name() == name)
    }

    /// Kind of source input `j` in original space.
    pub fn input_kind(&self, j: usize) -> ColumnKind {
        match self.columns.get(j) {
            Some(ColumnPlan::Numeric { .. }) => ColumnKind::Numeric,
            Some(ColumnPlan::Categorical { .. }) => ColumnKind::Categorical,
            None => ColumnKind::Categorical,
        }
    }
}
