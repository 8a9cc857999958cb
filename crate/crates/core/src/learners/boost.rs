//! Gradient boosting of regression trees on the weighted logistic loss.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::binning::BinnedMatrix;
use super::logistic::{sigmoid, softplus};
use super::tree::{check_config, fit_tree_binned, TreeConfig, TreeModel, TreeTarget};
use super::{check_fit_inputs, Predictor};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
    /// Fraction of rows drawn without replacement for each round.
    pub subsample: f64,
    pub feature_subsample: f64,
    pub max_bins: Option<usize>,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
            min_child_weight: 1e-3,
            lambda: 1.0,
            subsample: 1.0,
            feature_subsample: 1.0,
            max_bins: Some(256),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub trees: Vec<TreeModel>,
    pub learning_rate: f64,
    /// Log-odds of the weighted training prior.
    pub base_score: f64,
    pub n_features: usize,
    /// Weighted mean training loss before the first round and after each round.
    pub train_loss: Vec<f64>,
    /// Constraint multipliers after each round, when a gradient hook was used.
    pub multipliers: Vec<Vec<f64>>,
}

impl BoostModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_score
            + self.learning_rate * self.trees.iter().map(|t| t.leaf_value(row)).sum::<f64>()
    }

    pub fn split_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_features];
        for t in &self.trees {
            for (o, c) in out.iter_mut().zip(t.split_counts()) {
                *o += c;
            }
        }
        out
    }
}

impl Predictor for BoostModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

/// Extra gradient terms added to the boosting objective each round.
///
/// `g` and `h` arrive already multiplied by the normalized sample weights.
pub trait GradientHook {
    fn adjust(&mut self, round: usize, margins: &[f64], g: &mut [f64], h: &mut [f64]);

    /// Current multiplier values, recorded after each round.
    fn multipliers(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Weighted logistic loss of one row, `w·(log(1 + eᵐ) − y·m)`.
pub fn row_loss(m: f64, y: f64, w: f64) -> f64 {
    w * (softplus(m) - y * m)
}

/// First and second derivative of [`row_loss`] in the margin.
pub fn row_grad_hess(m: f64, y: f64, w: f64) -> (f64, f64) {
    let p = sigmoid(m);
    (w * (p - y), w * p * (1.0 - p))
}

pub fn fit_boost(
    x: ArrayView2<f64>,
    y: &[u8],
    w: &[f64],
    cfg: &BoostConfig,
) -> Result<BoostModel> {
    fit_boost_with_hook(x, y, w, cfg, None)
}

pub fn fit_boost_with_hook(
    x: ArrayView2<f64>,
    y: &[u8],
    w: &[f64],
    cfg: &BoostConfig,
    mut hook: Option<&mut dyn GradientHook>,
) -> Result<BoostModel> {
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0) {
        return Err(Error::invalid("learning_rate must lie in (0, 1]"));
    }
    if !(cfg.subsample > 0.0 && cfg.subsample <= 1.0) {
        return Err(Error::invalid("subsample must lie in (0, 1]"));
    }
    check_fit_inputs(x, y, w)?;
    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        min_child_weight: cfg.min_child_weight,
        lambda: cfg.lambda,
        max_bins: cfg.max_bins,
        feature_subsample: cfg.feature_subsample,
    };
    check_config(&tree_cfg)?;

    let n = x.nrows();
    let total: f64 = w.iter().sum();
    let wn: Vec<f64> = w.iter().map(|v| v * n as f64 / total).collect();
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let w1: f64 = wn.iter().zip(&yf).map(|(w, y)| w * y).sum();
    let base_score = (w1 / (n as f64 - w1)).ln();

    let loss = |m: &[f64]| -> f64 {
        m.iter()
            .zip(&yf)
            .zip(&wn)
            .map(|((&m, &y), &w)| row_loss(m, y, w))
            .sum::<f64>()
            / n as f64
    };

    let mut margins = vec![base_score; n];
    let mut model = BoostModel {
        trees: Vec::with_capacity(cfg.n_trees),
        learning_rate: cfg.learning_rate,
        base_score,
        n_features: x.ncols(),
        train_loss: vec![loss(&margins)],
        multipliers: Vec::new(),
    };
    if cfg.n_trees == 0 {
        return Ok(model);
    }
    let bins = BinnedMatrix::new(x, cfg.max_bins);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut mask = vec![1.0; n];
    let n_sub = ((cfg.subsample * n as f64).round() as usize).clamp(1, n);
    for round in 0..cfg.n_trees {
        let mut r = rng::substream(cfg.seed, "boost", round as u64);
        for i in 0..n {
            (g[i], h[i]) = row_grad_hess(margins[i], yf[i], wn[i]);
        }
        if let Some(hk) = hook.as_deref_mut() {
            hk.adjust(round, &margins, &mut g, &mut h);
        }
        if n_sub < n {
            mask.iter_mut().for_each(|m| *m = 0.0);
            for i in sample(&mut r, n, n_sub) {
                mask[i] = 1.0;
            }
        }
        let tree = fit_tree_binned(
            &bins,
            TreeTarget::Gradient { g: &g, h: &h },
            &mask,
            &tree_cfg,
            Some(&mut r),
        );
        for (i, m) in margins.iter_mut().enumerate() {
            let row = x.row(i);
            *m += cfg.learning_rate * tree_value(&tree, row);
        }
        model.trees.push(tree);
        model.train_loss.push(loss(&margins));
        if let Some(hk) = hook.as_deref() {
            model.multipliers.push(hk.multipliers());
        }
    }
    Ok(model)
}

fn tree_value(tree: &TreeModel, row: ndarray::ArrayView1<f64>) -> f64 {
    match row.as_slice() {
        Some(s) => tree.leaf_value(s),
        None => tree.leaf_value(&row.to_vec()),
    }
}
