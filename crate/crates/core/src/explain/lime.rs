//! Local linear surrogates fitted on perturbations around one row.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_data, check_width, column_moments, observed, FeatureKind, Scorer};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// RBF kernel width in the interpretable space; `None` uses `0.75·√d`.
    pub kernel_width: Option<f64>,
    /// Ridge penalty on the slopes (the intercept is not penalized).
    pub ridge: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            kernel_width: None,
            ridge: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    pub features: Vec<String>,
    /// Slope per input: per standard deviation for numeric inputs, for "same level
    /// as the explained row" on categorical inputs.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Standard deviation used for each numeric input (1 for categoricals).
    pub scales: Vec<f64>,
    /// Kernel-weighted R² of the surrogate on the perturbed set.
    pub r2: f64,
    pub kernel_width: f64,
    /// Model score of the explained row.
    pub prediction: f64,
}

enum Sampler {
    Numeric { center: f64, std: f64 },
    /// Observed levels with their cumulative frequency.
    Categorical { own: f64, levels: Vec<(f64, f64)> },
}

/// Numeric inputs move by Gaussian noise scaled to their spread in `data`;
/// categorical inputs are redrawn from their marginal frequencies in `data`.
pub fn lime_local<S: Scorer + ?Sized>(
    s: &S,
    row: &[f64],
    data: ArrayView2<f64>,
    cfg: &LimeConfig,
) -> Result<LimeExplanation> {
    check_width(s, row.len())?;
    check_data(s, data)?;
    let d = s.n_inputs();
    if cfg.n_samples < 10 * d {
        return Err(Error::invalid(format!(
            "LIME needs at least {} samples for {d} features, got {}",
            10 * d,
            cfg.n_samples
        )));
    }
    let width = cfg.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    if !(width > 0.0) || cfg.ridge < 0.0 {
        return Err(Error::invalid("kernel width must be positive and ridge non-negative"));
    }
    let samplers = (0..d)
        .map(|j| {
            let zero_var = || Error::invalid(format!("degenerate perturbation: {} has zero variance", s.feature_name(j)));
            match s.feature_kind(j) {
                FeatureKind::Numeric => {
                    let (mean, std) = column_moments(data, j);
                    if !(std > 0.0) {
                        return Err(zero_var());
                    }
                    let center = if row[j].is_nan() { mean } else { row[j] };
                    Ok(Sampler::Numeric { center, std })
                }
                FeatureKind::Categorical { .. } => {
                    let mut values = observed(data, j);
                    values.sort_by(f64::total_cmp);
                    let n = values.len() as f64;
                    let mut levels: Vec<(f64, f64)> = Vec::new();
                    for (k, v) in values.iter().enumerate() {
                        match levels.last_mut() {
                            Some(last) if last.0 == *v => last.1 = (k + 1) as f64 / n,
                            _ => levels.push((*v, (k + 1) as f64 / n)),
                        }
                    }
                    if levels.len() < 2 {
                        return Err(zero_var());
                    }
                    Ok(Sampler::Categorical { own: row[j], levels })
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let n = cfg.n_samples;
    let mut r = rng::stream(cfg.seed, "lime");
    let mut z = DMatrix::<f64>::zeros(n, d);
    let mut y = DVector::<f64>::zeros(n);
    let mut w = DVector::<f64>::zeros(n);
    let mut x = vec![0.0; d];
    for i in 0..n {
        let mut dist2 = 0.0;
        for (j, sm) in samplers.iter().enumerate() {
            match sm {
                Sampler::Numeric { center, std } => {
                    let e: f64 = StandardNormal.sample(&mut r);
                    x[j] = center + std * e;
                    z[(i, j)] = e;
                    dist2 += e * e;
                }
                Sampler::Categorical { own, levels } => {
                    let u: f64 = r.random();
                    let pos = levels.iter().position(|l| u < l.1).unwrap_or(levels.len() - 1);
                    x[j] = levels[pos].0;
                    let same = f64::from(u8::from(x[j] == *own));
                    z[(i, j)] = same;
                    dist2 += 1.0 - same;
                }
            }
        }
        y[i] = s.score(&x);
        w[i] = (-dist2 / (width * width)).exp();
    }
    let (coef, intercept, r2) = weighted_ridge(&z, &y, &w, cfg.ridge)?;
    Ok(LimeExplanation {
        features: (0..d).map(|j| s.feature_name(j)).collect(),
        coefficients: coef,
        intercept,
        scales: samplers
            .iter()
            .map(|sm| match sm {
                Sampler::Numeric { std, .. } => *std,
                Sampler::Categorical { .. } => 1.0,
            })
            .collect(),
        r2,
        kernel_width: width,
        prediction: s.score(row),
    })
}

/// Minimizes `Σ wᵢ(yᵢ − b − zᵢ·β)² + λ‖β‖²`; returns `(β, b, weighted R²)`.
fn weighted_ridge(z: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, lambda: f64) -> Result<(Vec<f64>, f64, f64)> {
    let (n, d) = z.shape();
    let sw = w.sum();
    if !(sw > 0.0) {
        return Err(Error::invalid("all perturbations received zero kernel weight"));
    }
    let zbar = DVector::from_fn(d, |j, _| (0..n).map(|i| w[i] * z[(i, j)]).sum::<f64>() / sw);
    let ybar = w.dot(y) / sw;
    let mut a = DMatrix::<f64>::from_diagonal_element(d, d, lambda);
    let mut rhs = DVector::<f64>::zeros(d);
    for i in 0..n {
        let zc = DVector::from_fn(d, |j, _| z[(i, j)] - zbar[j]);
        a.ger(w[i], &zc, &zc, 1.0);
        rhs.axpy(w[i] * (y[i] - ybar), &zc, 1.0);
    }
    let beta = a
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| a.lu().solve(&rhs))
        .ok_or_else(|| Error::invalid("degenerate perturbation: surrogate system is singular"))?;
    let b = ybar - zbar.dot(&beta);
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for i in 0..n {
        let fit = b + (0..d).map(|j| z[(i, j)] * beta[j]).sum::<f64>();
        ss_res += w[i] * (y[i] - fit).powi(2);
        ss_tot += w[i] * (y[i] - ybar).powi(2);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((beta.iter().copied().collect(), b, r2))
}
