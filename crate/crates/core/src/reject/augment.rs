//! Acceptance model and the augmentation strategies.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::scenario::RejectScenario;
use crate::learners::{fit_logistic, predict_proba_batch, LogisticConfig, LogisticModel, Predictor};
use crate::{Error, Result};

/// Lower clip of acceptance probabilities; the upper clip is `1 − ACCEPT_CLIP`.
pub const ACCEPT_CLIP: f64 = 1e-3;

/// Origin of a row in an augmented training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Accepted,
    RejectInferred,
    RejectDuplicateGood,
    RejectDuplicateBad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTrainingSet {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub w: Vec<f64>,
    pub provenance: Vec<Provenance>,
    pub diagnostics: Vec<String>,
}

impl AugmentedTrainingSet {
    /// Accepted rows with their observed labels and unit weights.
    pub fn accepted_only(s: &RejectScenario) -> Self {
        let n = s.n_accepted();
        Self {
            x: s.x_accepted(),
            y: s.accepted_labels.clone(),
            w: vec![1.0; n],
            provenance: vec![Provenance::Accepted; n],
            diagnostics: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Appends rows of `x` with the given labels, weight and provenance.
    pub(crate) fn extend(&mut self, x: &Array2<f64>, rows: &[usize], labels: &[u8], w: &[f64], p: Provenance) {
        let add = x.select(Axis(0), rows);
        self.x.append(Axis(0), add.view()).expect("matching widths");
        self.y.extend_from_slice(labels);
        self.w.extend_from_slice(w);
        self.provenance.extend(std::iter::repeat_n(p, rows.len()));
    }

    pub fn bad_share(&self) -> f64 {
        self.y.iter().map(|&y| f64::from(y)).sum::<f64>() / self.len() as f64
    }
}

/// `P(accept | study features)` from a logistic model, clipped away from 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceModel {
    pub model: LogisticModel,
}

impl Predictor for AcceptanceModel {
    fn n_features(&self) -> usize {
        self.model.n_features()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        self.model.predict_proba_row(row).clamp(ACCEPT_CLIP, 1.0 - ACCEPT_CLIP)
    }
}

/// Fits the acceptance model on the whole pool (accept indicator as the target).
pub fn acceptance_model(s: &RejectScenario) -> Result<AcceptanceModel> {
    let y: Vec<u8> = s.accepted.iter().map(|&a| u8::from(a)).collect();
    let w = vec![1.0; y.len()];
    let model = fit_logistic(s.x_pool.view(), &y, &w, &LogisticConfig::default())?;
    Ok(AcceptanceModel { model })
}

fn accepted_probs(s: &RejectScenario, acc: &AcceptanceModel) -> Result<Vec<f64>> {
    predict_proba_batch(acc, s.x_accepted().view())
}

fn mean_normalize(w: &mut [f64]) {
    let m = w.iter().sum::<f64>() / w.len() as f64;
    w.iter_mut().for_each(|v| *v /= m);
}

/// Accepted rows weighted by `1 / P(accept)`, normalized to mean 1.
pub fn augment_upward(s: &RejectScenario, acc: &AcceptanceModel) -> Result<AugmentedTrainingSet> {
    let mut out = AugmentedTrainingSet::accepted_only(s);
    out.w = accepted_probs(s, acc)?.iter().map(|p| 1.0 / p).collect();
    mean_normalize(&mut out.w);
    Ok(out)
}

/// Accepted rows weighted by `P(reject) = 1 − P(accept)`, normalized to mean 1.
pub fn augment_downward(s: &RejectScenario, acc: &AcceptanceModel) -> Result<AugmentedTrainingSet> {
    let mut out = AugmentedTrainingSet::accepted_only(s);
    out.w = accepted_probs(s, acc)?.iter().map(|p| 1.0 - p).collect();
    mean_normalize(&mut out.w);
    Ok(out)
}

/// Quantile bands of the pool's acceptance scores; each accepted row is weighted by
/// its band's pool size over its accepted count. Bands without accepted rows are
/// merged into a neighbour.
pub fn augment_soft_cutoff(
    s: &RejectScenario,
    acc: &AcceptanceModel,
    n_bands: usize,
) -> Result<AugmentedTrainingSet> {
    if n_bands < 1 {
        return Err(Error::invalid("soft cut-off needs at least one band"));
    }
    let scores = predict_proba_batch(acc, s.x_pool.view())?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    // band edges at equal counts; rows with equal scores share a band
    let mut band = vec![0usize; n];
    let mut b = 0;
    for (rank, &i) in order.iter().enumerate() {
        let target = rank * n_bands / n;
        if target > b && (rank == 0 || scores[order[rank - 1]] != scores[i]) {
            b = target;
        }
        band[i] = b;
    }
    let mut pool = vec![0usize; n_bands];
    let mut accepted = vec![0usize; n_bands];
    for i in 0..n {
        pool[band[i]] += 1;
        accepted[band[i]] += usize::from(s.accepted[i]);
    }
    // merge bands without accepted rows into the next non-empty band (or the previous)
    let mut target: Vec<usize> = (0..n_bands).collect();
    let mut diagnostics = Vec::new();
    let live: Vec<usize> = (0..n_bands).filter(|&k| accepted[k] > 0).collect();
    for k in 0..n_bands {
        if accepted[k] == 0 && pool[k] > 0 {
            let to = live.iter().copied().find(|&l| l > k).or_else(|| live.last().copied()).expect("some accepted row");
            diagnostics.push(format!("band {k} has no accepted rows; merged into band {to}"));
            target[k] = to;
        }
    }
    let mut mp = vec![0usize; n_bands];
    let mut ma = vec![0usize; n_bands];
    for k in 0..n_bands {
        mp[target[k]] += pool[k];
        ma[target[k]] += accepted[k];
    }
    let mut out = AugmentedTrainingSet::accepted_only(s);
    out.w = (0..n)
        .filter(|&i| s.accepted[i])
        .map(|i| {
            let k = target[band[i]];
            mp[k] as f64 / ma[k] as f64
        })
        .collect();
    out.diagnostics = diagnostics;
    Ok(out)
}

/// Accepted rows with weight 1 plus two copies of each reject: labelled good with
/// weight `P(accept)` and labelled bad with weight `P(reject)`.
pub fn augment_fuzzy(s: &RejectScenario, acc: &AcceptanceModel) -> Result<AugmentedTrainingSet> {
    let mut out = AugmentedTrainingSet::accepted_only(s);
    let rej = s.rejected_indices();
    let p = predict_proba_batch(acc, s.x_rejected().view())?;
    let q: Vec<f64> = p.iter().map(|p| 1.0 - p).collect();
    out.extend(&s.x_pool, &rej, &vec![0; rej.len()], &p, Provenance::RejectDuplicateGood);
    out.extend(&s.x_pool, &rej, &vec![1; rej.len()], &q, Provenance::RejectDuplicateBad);
    Ok(out)
}
