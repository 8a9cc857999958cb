//! Random forests: bootstrap-weighted classification trees with per-node feature
//! sampling.

use ndarray::ArrayView2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::binning::BinnedMatrix;
use super::tree::{check_config, fit_tree_binned, TreeConfig, TreeModel, TreeTarget};
use super::{check_fit_inputs, Predictor};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features drawn at each node.
    pub feature_subsample: f64,
    pub bootstrap: bool,
    pub max_bins: Option<usize>,
    /// Majority vote of thresholded trees instead of probability averaging.
    pub hard_vote: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_samples_leaf: 1,
            feature_subsample: 0.3,
            bootstrap: true,
            max_bins: Some(256),
            hard_vote: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub feature_subsample: f64,
    pub seed: u64,
    pub hard_vote: bool,
}

impl Predictor for ForestModel {
    fn n_features(&self) -> usize {
        self.trees.first().map_or(0, |t| t.n_features)
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        let n = self.trees.len() as f64;
        if self.hard_vote {
            self.trees
                .iter()
                .filter(|t| t.predict_proba_row(row) >= 0.5)
                .count() as f64
                / n
        } else {
            self.trees.iter().map(|t| t.predict_proba_row(row)).sum::<f64>() / n
        }
    }
}

pub fn fit_forest(
    x: ArrayView2<f64>,
    y: &[u8],
    w: &[f64],
    cfg: &ForestConfig,
) -> Result<ForestModel> {
    if cfg.n_trees == 0 {
        return Err(Error::invalid("n_trees must be at least 1"));
    }
    check_fit_inputs(x, y, w)?;
    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        max_bins: cfg.max_bins,
        feature_subsample: cfg.feature_subsample,
        ..TreeConfig::default()
    };
    check_config(&tree_cfg)?;
    let bins = BinnedMatrix::new(x, cfg.max_bins);
    let n = x.nrows();
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut tree_w = vec![0.0; n];
    for t in 0..cfg.n_trees {
        let mut r = rng::substream(cfg.seed, "forest", t as u64);
        if cfg.bootstrap {
            tree_w.iter_mut().for_each(|v| *v = 0.0);
            for _ in 0..n {
                let i = r.random_range(0..n);
                tree_w[i] += w[i];
            }
        } else {
            tree_w.copy_from_slice(w);
        }
        trees.push(fit_tree_binned(
            &bins,
            TreeTarget::Classification(y),
            &tree_w,
            &tree_cfg,
            Some(&mut r),
        ));
    }
    Ok(ForestModel {
        trees,
        feature_subsample: cfg.feature_subsample,
        seed: cfg.seed,
        hard_vote: cfg.hard_vote,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::fit_tree;
    use ndarray::Array2;

    fn data() -> (Array2<f64>, Vec<u8>) {
        let mut r = rng::from_seed(9);
        let x = Array2::from_shape_fn((200, 5), |_| r.random::<f64>());
        let y = (0..200)
            .map(|i| u8::from(x[[i, 0]] - x[[i, 2]] + 0.2 * r.random::<f64>() > 0.1))
            .collect();
        (x, y)
    }

    #[test]
    fn degenerate_forest_equals_single_tree() {
        let (x, y) = data();
        let cfg = ForestConfig {
            n_trees: 1,
            max_depth: 4,
            feature_subsample: 1.0,
            bootstrap: false,
            max_bins: None,
            ..Default::default()
        };
        let f = fit_forest(x.view(), &y, &[1.0; 200], &cfg).unwrap();
        let tcfg = TreeConfig {
            max_depth: 4,
            ..Default::default()
        };
        let t = fit_tree(x.view(), TreeTarget::Classification(&y), &[1.0; 200], &tcfg).unwrap();
        assert_eq!(f.trees[0], t);
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = data();
        let cfg = ForestConfig {
            n_trees: 5,
            seed: 4,
            ..Default::default()
        };
        let a = fit_forest(x.view(), &y, &[1.0; 200], &cfg).unwrap();
        let b = fit_forest(x.view(), &y, &[1.0; 200], &cfg).unwrap();
        assert_eq!(a, b);
        let c = fit_forest(x.view(), &y, &[1.0; 200], &ForestConfig { seed: 5, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn prediction_is_mean_of_trees() {
        let (x, y) = data();
        let cfg = ForestConfig {
            n_trees: 7,
            ..Default::default()
        };
        let f = fit_forest(x.view(), &y, &[1.0; 200], &cfg).unwrap();
        let row = x.row(3).to_vec();
        let mean = f.trees.iter().map(|t| t.predict_proba_row(&row)).sum::<f64>() / 7.0;
        assert!((f.predict_proba_row(&row) - mean).abs() < 1e-15);
    }
}
