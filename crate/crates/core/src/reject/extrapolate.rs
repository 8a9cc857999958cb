//! Extrapolation: a model fit on accepted rows labels the rejects.

use serde::{Deserialize, Serialize};

use super::augment::{AugmentedTrainingSet, Provenance};
use super::scenario::RejectScenario;
use crate::learners::{predict_proba_batch, Predictor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtrapolationVariant {
    /// All rejects with labels `1[score ≥ 0.5]`.
    All,
    /// Only rejects inferred as bad payers.
    Bad,
    /// The `q` most confident rejects on each side.
    Confident,
}

/// Adds inferred rejects (weight 1) to the accepted set; `q` is the per-side
/// fraction of rejects used by [`ExtrapolationVariant::Confident`].
pub fn extrapolate<P: Predictor + ?Sized>(
    s: &RejectScenario,
    base: &P,
    variant: ExtrapolationVariant,
    q: f64,
) -> Result<AugmentedTrainingSet> {
    if !(q > 0.0 && q <= 0.5) {
        return Err(Error::invalid(format!("confidence fraction must lie in (0, 0.5], got {q}")));
    }
    let mut out = AugmentedTrainingSet::accepted_only(s);
    let rej = s.rejected_indices();
    if rej.is_empty() {
        return Ok(out);
    }
    let scores = predict_proba_batch(base, s.x_rejected().view())?;
    let inferred: Vec<u8> = scores.iter().map(|&p| u8::from(p >= 0.5)).collect();
    let keep: Vec<usize> = match variant {
        ExtrapolationVariant::All => (0..rej.len()).collect(),
        ExtrapolationVariant::Bad => (0..rej.len()).filter(|&k| inferred[k] == 1).collect(),
        ExtrapolationVariant::Confident => {
            let k = ((q * rej.len() as f64).round() as usize).max(1);
            let mut bad: Vec<usize> = (0..rej.len()).filter(|&i| inferred[i] == 1).collect();
            let mut good: Vec<usize> = (0..rej.len()).filter(|&i| inferred[i] == 0).collect();
            bad.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            good.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
            for (side, v) in [("bad", &bad), ("good", &good)] {
                if v.len() < k {
                    out.diagnostics.push(format!(
                        "only {} rejects inferred {side}; confident set scaled down from {k}",
                        v.len()
                    ));
                }
            }
            let mut keep: Vec<usize> = bad.into_iter().take(k).chain(good.into_iter().take(k)).collect();
            keep.sort_unstable();
            keep
        }
    };
    let rows: Vec<usize> = keep.iter().map(|&k| rej[k]).collect();
    let labels: Vec<u8> = keep.iter().map(|&k| inferred[k]).collect();
    out.extend(&s.x_pool, &rows, &labels, &vec![1.0; rows.len()], Provenance::RejectInferred);
    Ok(out)
}
