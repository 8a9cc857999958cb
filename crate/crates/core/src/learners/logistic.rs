//! L2-regularized weighted logistic regression fitted by damped Newton iterations.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{check_fit_inputs, Predictor};
use crate::Result;

pub fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^m)` without overflow.
pub(crate) fn softplus(m: f64) -> f64 {
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    /// L2 strength on the coefficients (the intercept is not penalized).
    pub reg: f64,
    /// Stop once the max-norm of the gradient falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            reg: 1e-4,
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// One coefficient per design column.
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Whether the gradient tolerance was reached before `max_iter`.
    pub converged: bool,
    pub n_iter: usize,
}

impl LogisticModel {
    pub fn new(coef: Vec<f64>, intercept: f64) -> Self {
        Self {
            coef,
            intercept,
            converged: true,
            n_iter: 0,
        }
    }

    /// Log-odds of default.
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }
}

impl Predictor for LogisticModel {
    fn n_features(&self) -> usize {
        self.coef.len()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }

    fn linear_margin(&self) -> Option<(&[f64], f64)> {
        Some((&self.coef, self.intercept))
    }
}

/// Value and gradient (intercept first) of the fitted objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticObjective {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Augmented-Lagrangian term `lambda*(a.beta - target) + mu/2*(a.beta - target)^2` on a
/// linear functional of the coefficients.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CovariancePenalty {
    pub a: Vec<f64>,
    pub target: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl CovariancePenalty {
    fn residual(&self, beta: &[f64]) -> f64 {
        self.a.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() - self.target
    }
}

struct Problem {
    /// Design with a leading column of ones.
    xa: Array2<f64>,
    y: Array1<f64>,
    /// Weights normalized to mean 1, divided by n.
    w: Array1<f64>,
    reg: f64,
    penalty: Option<CovariancePenalty>,
}

impl Problem {
    fn new(
        x: ArrayView2<f64>,
        y: &[u8],
        w: &[f64],
        reg: f64,
        penalty: Option<CovariancePenalty>,
    ) -> Self {
        let (n, d) = x.dim();
        let mut xa = Array2::<f64>::ones((n, d + 1));
        xa.slice_mut(ndarray::s![.., 1..]).assign(&x);
        let total: f64 = w.iter().sum();
        Self {
            xa,
            y: y.iter().map(|&v| f64::from(v)).collect(),
            w: w.iter().map(|&v| v / total).collect(),
            reg,
            penalty,
        }
    }

    fn loss(&self, theta: &Array1<f64>) -> f64 {
        let m = self.xa.dot(theta);
        let data: f64 = m
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((&m, &y), &w)| w * (softplus(m) - y * m))
            .sum();
        let beta = theta.slice(ndarray::s![1..]);
        let ridge = 0.5 * self.reg * beta.dot(&beta);
        let pen = self.penalty.as_ref().map_or(0.0, |p| {
            let r = p.residual(beta.as_slice().unwrap());
            p.lambda * r + 0.5 * p.mu * r * r
        });
        data + ridge + pen
    }

    fn grad(&self, theta: &Array1<f64>, p: &Array1<f64>) -> Array1<f64> {
        let r: Array1<f64> = (p - &self.y) * &self.w;
        let mut g = self.xa.t().dot(&r);
        for j in 1..theta.len() {
            g[j] += self.reg * theta[j];
        }
        if let Some(pen) = &self.penalty {
            let r = pen.residual(theta.slice(ndarray::s![1..]).as_slice().unwrap());
            let f = pen.lambda + pen.mu * r;
            for (j, a) in pen.a.iter().enumerate() {
                g[j + 1] += f * a;
            }
        }
        g
    }

    fn hessian(&self, theta: &Array1<f64>, p: &Array1<f64>) -> DMatrix<f64> {
        let s: Array1<f64> = p.mapv(|v| v * (1.0 - v)) * &self.w;
        let scaled = &self.xa * &s.view().insert_axis(Axis(1));
        let h = self.xa.t().dot(&scaled);
        let k = theta.len();
        let mut out = DMatrix::from_fn(k, k, |i, j| h[[i, j]]);
        for j in 1..k {
            out[(j, j)] += self.reg;
        }
        if let Some(pen) = &self.penalty {
            for (i, ai) in pen.a.iter().enumerate() {
                for (j, aj) in pen.a.iter().enumerate() {
                    out[(i + 1, j + 1)] += pen.mu * ai * aj;
                }
            }
        }
        out
    }

    fn probs(&self, theta: &Array1<f64>) -> Array1<f64> {
        self.xa.dot(theta).mapv(sigmoid)
    }
}

/// Objective value and gradient at `(intercept, coef)`; weights are normalized to
/// mean one internally, so scaling `w` leaves the objective unchanged.
pub fn logistic_objective(
    x: ArrayView2<f64>,
    y: &[u8],
    w: &[f64],
    reg: f64,
    intercept: f64,
    coef: &[f64],
) -> LogisticObjective {
    let prob = Problem::new(x, y, w, reg, None);
    let theta: Array1<f64> = std::iter::once(intercept).chain(coef.iter().copied()).collect();
    let p = prob.probs(&theta);
    LogisticObjective {
        loss: prob.loss(&theta),
        grad: prob.grad(&theta, &p).to_vec(),
    }
}

pub fn fit_logistic(
    x: ArrayView2<f64>,
    y: &[u8],
    w: &[f64],
    cfg: &LogisticConfig,
) -> Result<LogisticModel> {
    fit_logistic_penalized(x, y, w, cfg, None, None)
}

pub(crate) fn fit_logistic_penalized(
    x: ArrayView2<f64>,
    y: &[u8],
    w: &[f64],
    cfg: &LogisticConfig,
    penalty: Option<&CovariancePenalty>,
    warm_start: Option<&LogisticModel>,
) -> Result<LogisticModel> {
    check_fit_inputs(x, y, w)?;
    let d = x.ncols();
    let prob = Problem::new(x, y, w, cfg.reg, penalty.cloned());
    let mut theta = Array1::<f64>::zeros(d + 1);
    match warm_start {
        Some(m) => {
            theta[0] = m.intercept;
            theta.slice_mut(ndarray::s![1..]).assign(&Array1::from(m.coef.clone()));
        }
        None => {
            // start from the weighted prior log-odds
            let p1: f64 = prob.w.iter().zip(&prob.y).map(|(w, y)| w * y).sum();
            theta[0] = (p1 / (1.0 - p1)).ln();
        }
    }
    let mut loss = prob.loss(&theta);
    let mut converged = false;
    let mut n_iter = 0;
    while n_iter < cfg.max_iter {
        let p = prob.probs(&theta);
        let g = prob.grad(&theta, &p);
        if g.iter().all(|v| v.abs() <= cfg.tol) {
            converged = true;
            break;
        }
        n_iter += 1;
        let h = prob.hessian(&theta, &p);
        let gv = DVector::from_iterator(g.len(), g.iter().copied());
        let step: Array1<f64> = match h.cholesky() {
            Some(ch) => ch.solve(&(-&gv)).iter().copied().collect(),
            None => {
                log::debug!("hessian not positive definite at iteration {n_iter}; gradient step");
                g.mapv(|v| -v)
            }
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + &(&step * t);
            let l = prob.loss(&cand);
            if l <= loss + 1e-4 * t * slope {
                theta = cand;
                loss = l;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no further decrease is representable; accept if the gradient is tiny
            converged = g.iter().all(|v| v.abs() <= cfg.tol.max(1e-10) * 1e3);
            break;
        }
    }
    let coef: Vec<f64> = theta.iter().skip(1).copied().collect();
    if coef.iter().any(|v| !v.is_finite()) || !theta[0].is_finite() {
        return Err(crate::Error::invalid("logistic fit diverged to non-finite coefficients"));
    }
    if !converged {
        log::warn!("logistic regression stopped after {n_iter} iterations without converging");
    }
    Ok(LogisticModel {
        coef,
        intercept: theta[0],
        converged,
        n_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn random_instance(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<u8>, Vec<f64>) {
        let mut rng = crate::rng::from_seed(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
        let y = (0..n)
            .map(|i| {
                let m = x[[i, 0]] - 0.5 * x[[i, d - 1]];
                u8::from(rng.random::<f64>() < sigmoid(m))
            })
            .collect();
        let w = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        (x, y, w)
    }

    /// Plain weighted Newton iterations written independently of the solver above.
    fn oracle_newton(x: &Array2<f64>, y: &[u8], w: &[f64], reg: f64) -> Vec<f64> {
        let (n, d) = x.dim();
        let wsum: f64 = w.iter().sum();
        let mut th = vec![0.0; d + 1];
        for _ in 0..100 {
            let mut g = vec![0.0; d + 1];
            let mut h = vec![vec![0.0; d + 1]; d + 1];
            for i in 0..n {
                let mut xi = vec![1.0];
                xi.extend(x.row(i).iter());
                let m: f64 = xi.iter().zip(&th).map(|(a, b)| a * b).sum();
                let p = 1.0 / (1.0 + (-m).exp());
                let wi = w[i] / wsum;
                for a in 0..=d {
                    g[a] += wi * (p - f64::from(y[i])) * xi[a];
                    for b in 0..=d {
                        h[a][b] += wi * p * (1.0 - p) * xi[a] * xi[b];
                    }
                }
            }
            for a in 1..=d {
                g[a] += reg * th[a];
                h[a][a] += reg;
            }
            // Gaussian elimination on h * s = g
            let mut m: Vec<Vec<f64>> = h.clone();
            let mut rhs = g.clone();
            for c in 0..=d {
                let piv = (c..=d).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
                m.swap(c, piv);
                rhs.swap(c, piv);
                for r in c + 1..=d {
                    let f = m[r][c] / m[c][c];
                    for k in c..=d {
                        m[r][k] -= f * m[c][k];
                    }
                    rhs[r] -= f * rhs[c];
                }
            }
            let mut s = vec![0.0; d + 1];
            for c in (0..=d).rev() {
                let acc: f64 = (c + 1..=d).map(|k| m[c][k] * s[k]).sum();
                s[c] = (rhs[c] - acc) / m[c][c];
            }
            for a in 0..=d {
                th[a] -= s[a];
            }
        }
        th
    }

    #[test]
    fn matches_independent_newton() {
        let (x, y, w) = random_instance(50, 3, 5);
        let m = fit_logistic(x.view(), &y, &w, &LogisticConfig::default()).unwrap();
        let oracle = oracle_newton(&x, &y, &w, 1e-4);
        assert!(m.converged);
        assert!((m.intercept - oracle[0]).abs() < 1e-4);
        for (b, o) in m.coef.iter().zip(&oracle[1..]) {
            assert!((b - o).abs() < 1e-4, "{b} vs {o}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let (x, y, w) = random_instance(40, 4, 100 + seed);
            let mut rng = crate::rng::from_seed(seed);
            let theta: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let obj = logistic_objective(x.view(), &y, &w, 0.3, theta[0], &theta[1..]);
            for k in 0..5 {
                let h = 1e-5;
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[k] += h;
                tm[k] -= h;
                let lp = logistic_objective(x.view(), &y, &w, 0.3, tp[0], &tp[1..]).loss;
                let lm = logistic_objective(x.view(), &y, &w, 0.3, tm[0], &tm[1..]).loss;
                let fd = (lp - lm) / (2.0 * h);
                let rel = (fd - obj.grad[k]).abs() / obj.grad[k].abs().max(1e-8);
                assert!(rel < 1e-5, "coord {k}: fd {fd} vs {}", obj.grad[k]);
            }
        }
    }

    #[test]
    fn separable_direction_and_scale_invariance() {
        let x = Array2::from_shape_vec((6, 1), vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]).unwrap();
        let y = [0, 0, 0, 1, 1, 1];
        let cfg = LogisticConfig {
            reg: 0.1,
            ..Default::default()
        };
        let m1 = fit_logistic(x.view(), &y, &[1.0; 6], &cfg).unwrap();
        let m2 = fit_logistic(x.view(), &y, &[2.0; 6], &cfg).unwrap();
        assert!(m1.coef[0] > 0.0);
        assert_eq!(m1.coef, m2.coef);
        assert_eq!(m1.intercept, m2.intercept);
    }

    #[test]
    fn single_class_is_an_error() {
        let x = Array2::<f64>::zeros((3, 1));
        assert!(fit_logistic(x.view(), &[1, 1, 1], &[1.0; 3], &LogisticConfig::default()).is_err());
    }

    #[test]
    fn non_finite_feature_is_an_error() {
        let x = Array2::from_shape_vec((2, 1), vec![f64::NAN, 1.0]).unwrap();
        assert!(fit_logistic(x.view(), &[0, 1], &[1.0; 2], &LogisticConfig::default()).is_err());
    }
}
