//! Boosting with group-rate constraints handled by a Lagrangian on soft predictions.
//!
//! The soft favorable outcome of row `i` is `1 − σ(m_i)`; group rates average it over
//! group members (restricted to `Y = 0` rows for equal opportunity). The constraints
//! `r₁ − r₀ − ε ≤ 0` and `r₀ − r₁ − ε ≤ 0` enter the boosting gradient with their
//! multipliers, which follow projected dual ascent once per round.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::constrained::ConstraintKind;
use crate::learners::{fit_boost_with_hook, sigmoid, BoostConfig, BoostModel, GradientHook};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairGbmSpec {
    pub kind: ConstraintKind,
    /// Allowed gap between soft group rates.
    pub epsilon: f64,
    /// Dual ascent step; zero leaves the multipliers at zero.
    pub step: f64,
}

impl Default for FairGbmSpec {
    fn default() -> Self {
        Self {
            kind: ConstraintKind::EqualOpportunity,
            epsilon: 0.0,
            step: 0.1,
        }
    }
}

/// Differentiable group-rate gap.
#[derive(Debug, Clone)]
pub struct FairnessProxy {
    /// Group of each row that enters a rate, `None` for rows outside the rates.
    member: Vec<Option<u8>>,
    w: Vec<f64>,
    group_weight: [f64; 2],
    total_weight: f64,
    epsilon: f64,
}

impl FairnessProxy {
    pub fn new(y: &[u8], z: &[u8], w: &[f64], kind: ConstraintKind, epsilon: f64) -> Result<Self> {
        if y.len() != z.len() || y.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                actual: z.len().min(w.len()),
            });
        }
        let member: Vec<Option<u8>> = y
            .iter()
            .zip(z)
            .map(|(&y, &z)| match kind {
                ConstraintKind::DemographicParity => Some(z),
                ConstraintKind::EqualOpportunity => (y == 0).then_some(z),
            })
            .collect();
        let mut group_weight = [0.0; 2];
        for (m, &wi) in member.iter().zip(w) {
            if let Some(g) = m {
                group_weight[*g as usize] += wi;
            }
        }
        if group_weight.iter().any(|&g| g <= 0.0) {
            return Err(Error::EmptyCell("a group has no rows entering its rate".into()));
        }
        Ok(Self {
            member,
            w: w.to_vec(),
            group_weight,
            total_weight: w.iter().sum(),
            epsilon,
        })
    }

    /// Soft favorable rates of groups 0 and 1.
    pub fn rates(&self, margins: &[f64]) -> [f64; 2] {
        let mut r = [0.0; 2];
        for ((m, &wi), &mi) in self.member.iter().zip(&self.w).zip(margins) {
            if let Some(g) = m {
                r[*g as usize] += wi * (1.0 - sigmoid(mi));
            }
        }
        [r[0] / self.group_weight[0], r[1] / self.group_weight[1]]
    }

    /// Values of the two constraint functions.
    pub fn violations(&self, margins: &[f64]) -> [f64; 2] {
        let [r0, r1] = self.rates(margins);
        [r1 - r0 - self.epsilon, r0 - r1 - self.epsilon]
    }

    /// `W · Σ_k λ_k c_k(m)`, scaled by the total weight to match the summed loss.
    pub fn objective(&self, margins: &[f64], lambda: [f64; 2]) -> f64 {
        let v = self.violations(margins);
        self.total_weight * (lambda[0] * v[0] + lambda[1] * v[1])
    }

    /// Gradient of [`Self::objective`] with respect to the margins.
    pub fn gradient(&self, margins: &[f64], lambda: [f64; 2]) -> Vec<f64> {
        let net = lambda[0] - lambda[1];
        self.member
            .iter()
            .zip(&self.w)
            .zip(margins)
            .map(|((m, &wi), &mi)| match m {
                Some(g) => {
                    let p = sigmoid(mi);
                    // d r_g / d m_i = −w_i p(1−p) / W_g, and c_1 = r_1 − r_0 − ε
                    let dr = -wi * p * (1.0 - p) / self.group_weight[*g as usize];
                    let sign = if *g == 1 { 1.0 } else { -1.0 };
                    self.total_weight * net * sign * dr
                }
                None => 0.0,
            })
            .collect()
    }
}

struct Hook {
    proxy: FairnessProxy,
    step: f64,
    lambda: [f64; 2],
}

impl GradientHook for Hook {
    fn adjust(&mut self, _round: usize, margins: &[f64], g: &mut [f64], _h: &mut [f64]) {
        let v = self.proxy.violations(margins);
        for k in 0..2 {
            self.lambda[k] = (self.lambda[k] + self.step * v[k]).max(0.0);
        }
        if self.lambda == [0.0, 0.0] {
            return;
        }
        for (gi, d) in g.iter_mut().zip(self.proxy.gradient(margins, self.lambda)) {
            *gi += d;
        }
    }

    fn multipliers(&self) -> Vec<f64> {
        self.lambda.to_vec()
    }
}

/// Boosting with the group-rate constraint; the multiplier path is stored on the model.
pub fn fit_fairgbm(
    x: ArrayView2<f64>,
    y: &[u8],
    z: &[u8],
    w: &[f64],
    cfg: &BoostConfig,
    spec: &FairGbmSpec,
) -> Result<BoostModel> {
    if spec.step < 0.0 || spec.epsilon < 0.0 {
        return Err(Error::invalid("step and epsilon must be non-negative"));
    }
    let total: f64 = w.iter().sum();
    let wn: Vec<f64> = w.iter().map(|v| v * w.len() as f64 / total).collect();
    let mut hook = Hook {
        proxy: FairnessProxy::new(y, z, &wn, spec.kind, spec.epsilon)?,
        step: spec.step,
        lambda: [0.0; 2],
    };
    fit_boost_with_hook(x, y, w, cfg, Some(&mut hook))
}
