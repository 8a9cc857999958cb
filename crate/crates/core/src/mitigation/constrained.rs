//! Logistic regression under a cap on the covariance between the sensitive attribute
//! and the model margin.
//!
//! The covariance `(1/n) Σ (z_i − z̄) βᵀx_i` is linear in `β` (the intercept cancels),
//! so the cap `|aᵀβ| ≤ c` is a convex constraint. When the unconstrained fit violates
//! it, the optimum lies on the violated side, `aᵀβ = ±c`, which is enforced by an
//! augmented-Lagrangian quadratic penalty with escalating strength.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::learners::{
    fit_logistic, fit_logistic_penalized, CovariancePenalty, LogisticConfig, LogisticModel,
};
use crate::{Error, Result};

const FEASIBILITY_TOL: f64 = 1e-6;
const MU_START: f64 = 100.0;
const MU_FACTOR: f64 = 10.0;
const MAX_ROUNDS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    DemographicParity,
    EqualOpportunity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub kind: ConstraintKind,
    /// Covariance cap; `f64::INFINITY` disables the constraint.
    pub c: f64,
    /// Label whose rows form the covariance sum in equal-opportunity mode.
    pub conditioning_label: u8,
}

impl ConstraintSpec {
    pub fn new(kind: ConstraintKind, c: f64) -> Self {
        Self {
            kind,
            c,
            conditioning_label: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedFit {
    pub model: LogisticModel,
    /// Covariance term `aᵀβ` at the returned coefficients.
    pub covariance: f64,
    pub feasible: bool,
    pub rounds: usize,
    pub diagnostic: Option<String>,
}

/// Coefficient vector `a` with `aᵀβ` equal to the covariance between `z` and `βᵀx`
/// over the rows selected by the constraint kind.
pub(crate) fn covariance_direction(
    x: ArrayView2<f64>,
    y: &[u8],
    z: &[u8],
    spec: &ConstraintSpec,
) -> Result<Vec<f64>> {
    let rows: Vec<usize> = match spec.kind {
        ConstraintKind::DemographicParity => (0..x.nrows()).collect(),
        ConstraintKind::EqualOpportunity => {
            (0..x.nrows()).filter(|&i| y[i] == spec.conditioning_label).collect()
        }
    };
    if rows.is_empty() {
        return Err(Error::EmptyCell(format!(
            "no rows with label {} for the constraint",
            spec.conditioning_label
        )));
    }
    let m = rows.len() as f64;
    let zbar = rows.iter().map(|&i| f64::from(z[i])).sum::<f64>() / m;
    let mut a = vec![0.0; x.ncols()];
    for &i in &rows {
        let dz = f64::from(z[i]) - zbar;
        for (aj, xv) in a.iter_mut().zip(x.row(i)) {
            *aj += dz * xv / m;
        }
    }
    Ok(a)
}

pub fn fit_constrained_logistic(
    x: ArrayView2<f64>,
    y: &[u8],
    z: &[u8],
    w: &[f64],
    spec: &ConstraintSpec,
    cfg: &LogisticConfig,
) -> Result<ConstrainedFit> {
    if z.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: z.len(),
        });
    }
    if z.iter().any(|&v| v > 1) {
        return Err(Error::invalid("sensitive attribute must be binary"));
    }
    if spec.c.is_nan() || spec.c < 0.0 {
        return Err(Error::invalid("covariance cap must be non-negative"));
    }
    let a = covariance_direction(x, y, z, spec)?;
    let cov = |m: &LogisticModel| a.iter().zip(&m.coef).map(|(a, b)| a * b).sum::<f64>();

    let base = fit_logistic(x, y, w, cfg)?;
    let s0 = cov(&base);
    if spec.c.is_infinite() || s0.abs() <= spec.c {
        return Ok(ConstrainedFit {
            covariance: s0,
            model: base,
            feasible: true,
            rounds: 0,
            diagnostic: None,
        });
    }
    let mut penalty = CovariancePenalty {
        a: a.clone(),
        target: spec.c * s0.signum(),
        lambda: 0.0,
        mu: MU_START,
    };
    let mut model = base;
    let mut rounds = 0;
    let mut s = s0;
    while rounds < MAX_ROUNDS {
        rounds += 1;
        model = fit_logistic_penalized(x, y, w, cfg, Some(&penalty), Some(&model))?;
        s = cov(&model);
        if (s.abs() - spec.c) <= FEASIBILITY_TOL {
            break;
        }
        penalty.lambda += penalty.mu * (s - penalty.target);
        penalty.mu *= MU_FACTOR;
    }
    let feasible = s.abs() - spec.c <= FEASIBILITY_TOL;
    let diagnostic = if feasible {
        None
    } else {
        Some(format!(
            "covariance {s:.3e} still exceeds cap {:.3e} after {rounds} penalty rounds",
            spec.c
        ))
    };
    if let Some(d) = &diagnostic {
        log::warn!("{d}");
    }
    Ok(ConstrainedFit {
        model,
        covariance: s,
        feasible,
        rounds,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::logistic_objective;
    use ndarray::Array2;
    use rand::Rng;

    fn data(seed: u64) -> (Array2<f64>, Vec<u8>, Vec<u8>) {
        let mut r = crate::rng::from_seed(seed);
        let n = 300;
        let z: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let x = Array2::from_shape_fn((n, 3), |(i, j)| {
            let noise: f64 = r.random_range(-1.0..1.0);
            if j == 0 {
                noise + 1.5 * f64::from(z[i])
            } else {
                noise
            }
        });
        let y = (0..n)
            .map(|i| {
                let m = x[[i, 0]] + x[[i, 1]] - 0.7;
                u8::from(r.random::<f64>() < crate::learners::sigmoid(2.0 * m))
            })
            .collect();
        (x, y, z)
    }

    #[test]
    fn infinite_cap_is_unconstrained() {
        let (x, y, z) = data(1);
        let w = vec![1.0; y.len()];
        let cfg = LogisticConfig::default();
        let spec = ConstraintSpec::new(ConstraintKind::DemographicParity, f64::INFINITY);
        let fit = fit_constrained_logistic(x.view(), &y, &z, &w, &spec, &cfg).unwrap();
        let base = fit_logistic(x.view(), &y, &w, &cfg).unwrap();
        for (a, b) in fit.model.coef.iter().zip(&base.coef) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn cap_is_met_and_loss_not_below_unconstrained() {
        let (x, y, z) = data(2);
        let w = vec![1.0; y.len()];
        let cfg = LogisticConfig::default();
        let base = fit_logistic(x.view(), &y, &w, &cfg).unwrap();
        let base_loss = logistic_objective(x.view(), &y, &w, cfg.reg, base.intercept, &base.coef).loss;
        for kind in [ConstraintKind::DemographicParity, ConstraintKind::EqualOpportunity] {
            for c in [0.05, 0.01, 0.0] {
                let spec = ConstraintSpec::new(kind, c);
                let fit = fit_constrained_logistic(x.view(), &y, &z, &w, &spec, &cfg).unwrap();
                assert!(fit.feasible, "{kind:?} c={c}: {:?}", fit.diagnostic);
                let a = covariance_direction(x.view(), &y, &z, &spec).unwrap();
                let s: f64 = a.iter().zip(&fit.model.coef).map(|(a, b)| a * b).sum();
                assert!(s.abs() <= c + 1e-6);
                let l = logistic_objective(
                    x.view(),
                    &y,
                    &w,
                    cfg.reg,
                    fit.model.intercept,
                    &fit.model.coef,
                )
                .loss;
                assert!(l >= base_loss - 1e-12);
            }
        }
    }
}
