//! Binary decision trees grown by histogram split search.
//!
//! Classification trees split on weighted Gini gain and store the weighted positive
//! rate in each leaf. Gradient trees (used by boosting) split on the second-order
//! gain `G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)` and store `−G/(H+λ)`.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::binning::BinnedMatrix;
use super::{Predictor, check_fit_inputs};
use crate::rng::Rng;
use crate::{Error, Result};

/// Gains at or below this are treated as no improvement.
const MIN_GAIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Minimum hessian sum per child (gradient trees only).
    pub min_child_weight: f64,
    /// Leaf L2 regularization (gradient trees only).
    pub lambda: f64,
    /// `None` searches every midpoint between distinct values.
    pub max_bins: Option<usize>,
    /// Fraction of features drawn at each node.
    pub feature_subsample: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_samples_leaf: 1,
            min_child_weight: 1e-3,
            lambda: 1.0,
            max_bins: None,
            feature_subsample: 1.0,
        }
    }
}

/// What the tree is fitted to.
#[derive(Debug, Clone, Copy)]
pub enum TreeTarget<'a> {
    Classification(&'a [u8]),
    /// Per-sample gradient and hessian of the loss at the current margins.
    Gradient { g: &'a [f64], h: &'a [f64] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    /// Preorder node array; index 0 is the root.
    pub nodes: Vec<Node>,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub n_features: usize,
}

impl TreeModel {
    /// Raw leaf value reached by `row`.
    pub fn leaf_value(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Number of internal nodes splitting on each feature.
    pub fn split_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_features];
        for n in &self.nodes {
            if let Node::Split { feature, .. } = n {
                out[*feature] += 1;
            }
        }
        out
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn rec(nodes: &[Node], k: usize) -> usize {
            match &nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + rec(nodes, *left).max(rec(nodes, *right)),
            }
        }
        rec(&self.nodes, 0)
    }
}

impl Predictor for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        self.leaf_value(row).clamp(0.0, 1.0)
    }
}

pub(crate) fn check_config(cfg: &TreeConfig) -> Result<()> {
    if cfg.max_depth < 1 {
        return Err(Error::invalid("max_depth must be at least 1"));
    }
    if cfg.min_samples_leaf < 1 {
        return Err(Error::invalid("min_samples_leaf must be at least 1"));
    }
    if !(cfg.feature_subsample > 0.0 && cfg.feature_subsample <= 1.0) {
        return Err(Error::invalid("feature_subsample must lie in (0, 1]"));
    }
    if cfg.lambda < 0.0 || cfg.min_child_weight < 0.0 {
        return Err(Error::invalid("lambda and min_child_weight must be non-negative"));
    }
    Ok(())
}

/// Fits a single tree on all rows of `x`.
pub fn fit_tree(
    x: ArrayView2<f64>,
    target: TreeTarget<'_>,
    w: &[f64],
    cfg: &TreeConfig,
) -> Result<TreeModel> {
    check_config(cfg)?;
    match target {
        TreeTarget::Classification(y) => check_fit_inputs(x, y, w).or_else(|e| match e {
            // a pure node is a valid (single-leaf) tree
            Error::InvalidInput(m) if m.starts_with("both classes") => Ok(()),
            e => Err(e),
        })?,
        TreeTarget::Gradient { g, h } => {
            if g.len() != x.nrows() || h.len() != x.nrows() || w.len() != x.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: x.nrows(),
                    actual: g.len().min(h.len()).min(w.len()),
                });
            }
        }
    }
    if x.nrows() == 0 {
        return Err(Error::invalid("cannot fit a tree on zero rows"));
    }
    let bins = BinnedMatrix::new(x, cfg.max_bins);
    Ok(fit_tree_binned(&bins, target, w, cfg, None))
}

#[derive(Clone, Copy, Default)]
struct Stat {
    count: usize,
    w: f64,
    /// Σw·y (classification) or Σw·g.
    s1: f64,
    /// Σw·h (gradient trees).
    s2: f64,
}

impl Stat {
    fn add(&mut self, o: &Stat) {
        self.count += o.count;
        self.w += o.w;
        self.s1 += o.s1;
        self.s2 += o.s2;
    }

    fn minus(&self, o: &Stat) -> Stat {
        Stat {
            count: self.count - o.count,
            w: self.w - o.w,
            s1: self.s1 - o.s1,
            s2: self.s2 - o.s2,
        }
    }
}

struct Builder<'a> {
    bins: &'a BinnedMatrix,
    target: TreeTarget<'a>,
    w: &'a [f64],
    cfg: &'a TreeConfig,
    rng: Option<&'a mut Rng>,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn row_stat(&self, i: usize) -> Stat {
        let w = self.w[i];
        match self.target {
            TreeTarget::Classification(y) => Stat {
                count: 1,
                w,
                s1: w * f64::from(y[i]),
                s2: 0.0,
            },
            TreeTarget::Gradient { g, h } => Stat {
                count: 1,
                w,
                s1: w * g[i],
                s2: w * h[i],
            },
        }
    }

    fn classification(&self) -> bool {
        matches!(self.target, TreeTarget::Classification(_))
    }

    fn leaf_value(&self, s: &Stat) -> f64 {
        if self.classification() {
            if s.w > 0.0 {
                (s.s1 / s.w).clamp(0.0, 1.0)
            } else {
                0.0
            }
        } else {
            -s.s1 / (s.s2 + self.cfg.lambda)
        }
    }

    /// Impurity-style score; gain = score(L) + score(R) − score(parent).
    fn score(&self, s: &Stat) -> f64 {
        if self.classification() {
            // minus the weighted Gini impurity W·2p(1−p)
            if s.w > 0.0 {
                -2.0 * s.s1 * (s.w - s.s1) / s.w
            } else {
                0.0
            }
        } else {
            s.s1 * s.s1 / (s.s2 + self.cfg.lambda)
        }
    }

    fn child_ok(&self, s: &Stat) -> bool {
        s.count >= self.cfg.min_samples_leaf
            && s.w > 0.0
            && (self.classification() || s.s2 >= self.cfg.min_child_weight)
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.bins.n_features();
        match self.rng.as_deref_mut() {
            Some(rng) if self.cfg.feature_subsample < 1.0 => {
                let k = ((self.cfg.feature_subsample * d as f64).round() as usize).clamp(1, d);
                let mut f = sample(rng, d, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// Best (gain, feature, cut index) over the candidate features.
    fn best_split(&mut self, rows: &[usize], total: &Stat) -> Option<(f64, usize, usize)> {
        let parent = self.score(total);
        let mut best: Option<(f64, usize, usize)> = None;
        for j in self.candidate_features() {
            let nb = self.bins.n_bins(j);
            if nb < 2 {
                continue;
            }
            let codes = self.bins.column_codes(j);
            let mut hist = vec![Stat::default(); nb];
            for &i in rows {
                let s = self.row_stat(i);
                hist[codes[i] as usize].add(&s);
            }
            let mut left = Stat::default();
            for (k, h) in hist.iter().enumerate().take(nb - 1) {
                left.add(h);
                if left.count == 0 {
                    continue;
                }
                if left.count == total.count {
                    break;
                }
                let right = total.minus(&left);
                if !self.child_ok(&left) || !self.child_ok(&right) {
                    continue;
                }
                let gain = self.score(&left) + self.score(&right) - parent;
                if gain > MIN_GAIN && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, j, k));
                }
            }
        }
        best
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let mut total = Stat::default();
        for &i in rows.iter() {
            total.add(&self.row_stat(i));
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(&total),
        });
        if depth >= self.cfg.max_depth || rows.len() < 2 * self.cfg.min_samples_leaf {
            return id;
        }
        let Some((_, feature, cut)) = self.best_split(rows, &total) else {
            return id;
        };
        let codes = self.bins.column_codes(feature);
        let mut mid = 0;
        for k in 0..rows.len() {
            if codes[rows[k]] as usize <= cut {
                rows.swap(k, mid);
                mid += 1;
            }
        }
        let (l, r) = rows.split_at_mut(mid);
        l.sort_unstable();
        r.sort_unstable();
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold: self.bins.cuts[feature][cut],
            left,
            right,
        };
        id
    }
}

/// Grows a tree on pre-binned data. Rows with zero weight are ignored.
pub(crate) fn fit_tree_binned(
    bins: &BinnedMatrix,
    target: TreeTarget<'_>,
    w: &[f64],
    cfg: &TreeConfig,
    rng: Option<&mut Rng>,
) -> TreeModel {
    let mut rows: Vec<usize> = (0..bins.n_rows()).filter(|&i| w[i] > 0.0).collect();
    let mut b = Builder {
        bins,
        target,
        w,
        cfg,
        rng,
        nodes: Vec::new(),
    };
    b.build(&mut rows, 0);
    TreeModel {
        nodes: b.nodes,
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        n_features: bins.n_features(),
    }
}
