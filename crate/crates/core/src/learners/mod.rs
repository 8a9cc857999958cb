//! Benchmark learners: weighted logistic regression, CART-style trees, random forests
//! and gradient boosting, all behind the [`Predictor`] trait.

mod binning;
mod boost;
mod family;
mod forest;
mod logistic;
mod tree;

pub use binning::BinnedMatrix;
pub use boost::{
    fit_boost, fit_boost_with_hook, row_grad_hess, row_loss, BoostConfig, BoostModel, GradientHook,
};
pub use family::{boost_config, fit_family, Family};
pub use forest::{fit_forest, ForestConfig, ForestModel};
pub use logistic::{
    fit_logistic, logistic_objective, sigmoid, LogisticConfig, LogisticModel, LogisticObjective,
};
pub(crate) use logistic::{fit_logistic_penalized, CovariancePenalty};
pub use tree::{fit_tree, Node, TreeConfig, TreeModel, TreeTarget};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Scoring interface: a feature row maps to a probability of default.
pub trait Predictor {
    /// Number of columns expected in each row.
    fn n_features(&self) -> usize;

    fn predict_proba_row(&self, row: &[f64]) -> f64;

    /// `1` iff the probability reaches `threshold`.
    fn predict(&self, row: &[f64], threshold: f64) -> u8 {
        u8::from(self.predict_proba_row(row) >= threshold)
    }

    /// Coefficients and intercept when the log-odds are linear in the row.
    fn linear_margin(&self) -> Option<(&[f64], f64)> {
        None
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        (**self).predict_proba_row(row)
    }

    fn linear_margin(&self) -> Option<(&[f64], f64)> {
        (**self).linear_margin()
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        (**self).predict_proba_row(row)
    }

    fn linear_margin(&self) -> Option<(&[f64], f64)> {
        (**self).linear_margin()
    }
}

/// Scores every row of `x`.
pub fn predict_proba_batch<P: Predictor + ?Sized>(m: &P, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    if x.nrows() > 0 && x.ncols() != m.n_features() {
        return Err(Error::DimensionMismatch {
            expected: m.n_features(),
            actual: x.ncols(),
        });
    }
    let mut buf = vec![0.0; x.ncols()];
    Ok(x
        .rows()
        .into_iter()
        .map(|r| match r.as_slice() {
            Some(s) => m.predict_proba_row(s),
            None => {
                buf.iter_mut().zip(r.iter()).for_each(|(b, v)| *b = *v);
                m.predict_proba_row(&buf)
            }
        })
        .collect())
}

/// Any fitted learner, for storage and uniform dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    Logistic(LogisticModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Boost(BoostModel),
}

impl Model {
    pub fn family(&self) -> &'static str {
        match self {
            Model::Logistic(_) => "logistic",
            Model::Tree(_) => "tree",
            Model::Forest(_) => "forest",
            Model::Boost(_) => "boost",
        }
    }
}

impl Predictor for Model {
    fn n_features(&self) -> usize {
        match self {
            Model::Logistic(m) => m.n_features(),
            Model::Tree(m) => m.n_features(),
            Model::Forest(m) => m.n_features(),
            Model::Boost(m) => m.n_features(),
        }
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        match self {
            Model::Logistic(m) => m.predict_proba_row(row),
            Model::Tree(m) => m.predict_proba_row(row),
            Model::Forest(m) => m.predict_proba_row(row),
            Model::Boost(m) => m.predict_proba_row(row),
        }
    }

    fn linear_margin(&self) -> Option<(&[f64], f64)> {
        match self {
            Model::Logistic(m) => m.linear_margin(),
            _ => None,
        }
    }
}

/// Shared input checks for every fit routine.
pub(crate) fn check_fit_inputs(x: ArrayView2<f64>, y: &[u8], w: &[f64]) -> Result<()> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: w.len(),
        });
    }
    if let Some(i) = y.iter().position(|&v| v > 1) {
        return Err(Error::invalid(format!("label at row {i} is not binary")));
    }
    if w.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::invalid("sample weights must be finite and non-negative"));
    }
    if let Some((i, _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite feature at {i:?}")));
    }
    let w1: f64 = y.iter().zip(w).filter(|(&y, _)| y == 1).map(|(_, w)| w).sum();
    let w0: f64 = y.iter().zip(w).filter(|(&y, _)| y == 0).map(|(_, w)| w).sum();
    if w1 <= 0.0 || w0 <= 0.0 {
        return Err(Error::invalid(
            "both classes must be present with positive weight",
        ));
    }
    Ok(())
}
