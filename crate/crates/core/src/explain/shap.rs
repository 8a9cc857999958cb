//! Interventional Shapley values: absent features take background values.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_data, check_width, OutputScale, Scorer};
use crate::rng;
use crate::{Error, Result};

/// Largest input count accepted by exact coalition enumeration.
pub const EXACT_MAX_FEATURES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapMode {
    Exact,
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapConfig {
    pub mode: ShapMode,
    pub n_permutations: usize,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            mode: ShapMode::Exact,
            n_permutations: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub features: Vec<String>,
    /// Mean score over the background.
    pub base_value: f64,
    pub contributions: Vec<f64>,
    /// Score of the explained row; equals `base_value + Σ contributions`.
    pub prediction: f64,
    pub scale: OutputScale,
    pub mode: ShapMode,
}

/// Seeded subsample of `n` rows (all rows when `n` is at least the row count).
pub fn background_sample(data: ArrayView2<f64>, n: usize, seed: u64) -> Array2<f64> {
    if n >= data.nrows() {
        return data.to_owned();
    }
    let mut r = rng::stream(seed, "shap-background");
    let mut idx = rand::seq::index::sample(&mut r, data.nrows(), n).into_vec();
    idx.sort_unstable();
    data.select(Axis(0), &idx)
}

pub fn shap_values<S: Scorer + ?Sized>(
    s: &S,
    row: &[f64],
    background: ArrayView2<f64>,
    cfg: &ShapConfig,
) -> Result<Attribution> {
    check_width(s, row.len())?;
    check_data(s, background)?;
    let (base_value, contributions) = match cfg.mode {
        ShapMode::Exact => exact(s, row, background)?,
        ShapMode::Permutation => permutation(s, row, background, cfg.n_permutations, cfg.seed)?,
    };
    Ok(Attribution {
        features: (0..s.n_inputs()).map(|j| s.feature_name(j)).collect(),
        base_value,
        contributions,
        prediction: s.score(row),
        scale: s.scale(),
        mode: cfg.mode,
    })
}

fn exact<S: Scorer + ?Sized>(s: &S, row: &[f64], bg: ArrayView2<f64>) -> Result<(f64, Vec<f64>)> {
    let d = s.n_inputs();
    if d > EXACT_MAX_FEATURES {
        return Err(Error::invalid(format!(
            "exact Shapley values support at most {EXACT_MAX_FEATURES} features, got {d}; use permutation mode"
        )));
    }
    let n_masks = 1usize << d;
    let mut value = vec![0.0; n_masks];
    let mut z = vec![0.0; d];
    for (mask, v) in value.iter_mut().enumerate() {
        let mut sum = 0.0;
        for b in bg.rows() {
            for j in 0..d {
                z[j] = if mask >> j & 1 == 1 { row[j] } else { b[j] };
            }
            sum += s.score(&z);
        }
        *v = sum / bg.nrows() as f64;
    }
    // weight(k) = k!(d−k−1)!/d! for coalitions of size k not containing the feature
    let mut weight = vec![0.0; d.max(1)];
    for (k, w) in weight.iter_mut().enumerate() {
        let mut binom = 1.0;
        for i in 0..k {
            binom = binom * (d - 1 - i) as f64 / (i + 1) as f64;
        }
        *w = 1.0 / (d as f64 * binom);
    }
    let mut phi = Vec::with_capacity(d);
    let mut terms = Vec::with_capacity(n_masks / 2);
    for i in 0..d {
        terms.clear();
        for mask in (0..n_masks).filter(|m| m >> i & 1 == 0) {
            let k = mask.count_ones() as usize;
            terms.push(weight[k] * (value[mask | 1 << i] - value[mask]));
        }
        // Summing in sorted order makes symmetric features agree exactly.
        terms.sort_by(f64::total_cmp);
        phi.push(terms.iter().sum());
    }
    Ok((value[0], phi))
}

fn permutation<S: Scorer + ?Sized>(
    s: &S,
    row: &[f64],
    bg: ArrayView2<f64>,
    n_permutations: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    if n_permutations == 0 {
        return Err(Error::invalid("permutation mode needs at least one permutation"));
    }
    let d = s.n_inputs();
    let mut phi = vec![0.0; d];
    let mut order: Vec<usize> = (0..d).collect();
    let mut z = vec![0.0; d];
    let base = bg.rows().into_iter().map(|b| s.score(&b.to_vec())).sum::<f64>() / bg.nrows() as f64;
    for p in 0..n_permutations {
        let mut r = rng::substream(seed, "shap-permutation", p as u64);
        order.sort_unstable();
        order.shuffle(&mut r);
        for b in bg.rows() {
            z.iter_mut().zip(b.iter()).for_each(|(z, v)| *z = *v);
            let mut prev = s.score(&z);
            for &j in &order {
                z[j] = row[j];
                let cur = s.score(&z);
                phi[j] += cur - prev;
                prev = cur;
            }
        }
    }
    let n = (n_permutations * bg.nrows()) as f64;
    phi.iter_mut().for_each(|v| *v /= n);
    Ok((base, phi))
}
