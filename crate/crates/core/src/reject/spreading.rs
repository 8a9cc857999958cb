//! Label spreading on a symmetric k-nearest-neighbour graph.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::augment::{AugmentedTrainingSet, Provenance};
use super::scenario::RejectScenario;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpreadingConfig {
    pub k: usize,
    /// RBF width; `None` uses `1/d`.
    pub gamma: Option<f64>,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SpreadingConfig {
    fn default() -> Self {
        Self {
            k: 7,
            gamma: None,
            alpha: 0.8,
            tol: 1e-3,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingResult {
    /// Class scores `F` per row (columns: good, bad).
    pub scores: Array2<f64>,
    /// `argmax` of each row, ties to label 0.
    pub labels: Vec<u8>,
    /// Largest entry of each row after normalizing it to sum 1 (0.5 for zero rows).
    pub confidence: Vec<f64>,
    /// Rows whose two class scores tie.
    pub low_confidence: Vec<bool>,
    pub converged: bool,
    pub n_iter: usize,
}

/// Sparse symmetric adjacency: `(neighbour, weight)` lists.
pub(crate) type Graph = Vec<Vec<(usize, f64)>>;

/// Symmetric kNN graph with RBF weights `exp(−γ‖x_i − x_j‖²)`; an edge exists when
/// either endpoint is among the other's `k` nearest (ties by index).
pub(crate) fn knn_graph(x: ArrayView2<f64>, k: usize, gamma: f64) -> Graph {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let k = k.min(n.saturating_sub(1));
    let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(n * k);
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for i in 0..n {
        best.clear();
        for j in 0..n {
            if j == i {
                continue;
            }
            let d: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() == k && d >= best[k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, j));
            best.truncate(k);
        }
        for &(d, j) in &best {
            pairs.push((i.min(j), i.max(j), d));
        }
    }
    pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    pairs.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    let mut g: Graph = vec![Vec::new(); n];
    for (i, j, d) in pairs {
        let w = (-gamma * d).exp();
        g[i].push((j, w));
        g[j].push((i, w));
    }
    g
}

/// Symmetric normalization `D^{-1/2} W D^{-1/2}`; isolated nodes keep empty rows.
pub(crate) fn normalize(g: &Graph) -> Graph {
    let inv_sqrt: Vec<f64> = g
        .iter()
        .map(|r| {
            let d: f64 = r.iter().map(|e| e.1).sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    g.iter()
        .enumerate()
        .map(|(i, r)| r.iter().map(|&(j, w)| (j, inv_sqrt[i] * w * inv_sqrt[j])).collect())
        .collect()
}

/// Spreads the observed labels (`None` = unlabelled) over the graph of `x`.
pub fn spread_labels(x: ArrayView2<f64>, observed: &[Option<u8>], cfg: &SpreadingConfig) -> Result<SpreadingResult> {
    let n = x.nrows();
    if observed.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: observed.len(),
        });
    }
    if cfg.k == 0 || !(0.0..1.0).contains(&cfg.alpha) || cfg.tol <= 0.0 {
        return Err(Error::invalid("label spreading needs k ≥ 1, α in [0, 1) and tol > 0"));
    }
    if observed.iter().flatten().any(|&y| y > 1) {
        return Err(Error::invalid("observed labels must be binary"));
    }
    let gamma = cfg.gamma.unwrap_or(1.0 / x.ncols().max(1) as f64);
    let s = normalize(&knn_graph(x, cfg.k, gamma));
    let mut f0 = Array2::<f64>::zeros((n, 2));
    for (i, y) in observed.iter().enumerate() {
        if let Some(y) = y {
            f0[[i, *y as usize]] = 1.0;
        }
    }
    let mut f = f0.clone();
    let mut next = Array2::<f64>::zeros((n, 2));
    let (mut converged, mut n_iter) = (false, 0);
    while n_iter < cfg.max_iter {
        n_iter += 1;
        let mut delta: f64 = 0.0;
        for i in 0..n {
            for c in 0..2 {
                let spread: f64 = s[i].iter().map(|&(j, w)| w * f[[j, c]]).sum();
                let v = cfg.alpha * spread + (1.0 - cfg.alpha) * f0[[i, c]];
                delta = delta.max((v - f[[i, c]]).abs());
                next[[i, c]] = v;
            }
        }
        std::mem::swap(&mut f, &mut next);
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("label spreading stopped at {n_iter} iterations without converging");
    }
    let mut labels = Vec::with_capacity(n);
    let mut confidence = Vec::with_capacity(n);
    let mut low_confidence = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (f[[i, 0]], f[[i, 1]]);
        labels.push(u8::from(b > a));
        low_confidence.push(a == b);
        let sum = a + b;
        confidence.push(if sum > 0.0 { a.max(b) / sum } else { 0.5 });
    }
    Ok(SpreadingResult {
        scores: f,
        labels,
        confidence,
        low_confidence,
        converged,
        n_iter,
    })
}

/// Spreads the accepted labels of a scenario's pool to its rejects; the returned
/// result covers the rejected rows only, in pool order.
pub fn label_spreading(s: &RejectScenario, cfg: &SpreadingConfig) -> Result<SpreadingResult> {
    let observed: Vec<Option<u8>> = {
        let mut acc = s.accepted_labels.iter();
        s.accepted.iter().map(|&a| if a { acc.next().copied() } else { None }).collect()
    };
    let full = spread_labels(s.x_pool.view(), &observed, cfg)?;
    let changed = (0..observed.len())
        .filter(|&i| observed[i].is_some_and(|y| y != full.labels[i]))
        .count();
    if changed > 0 {
        log::warn!("label spreading flipped {changed} accepted labels");
    }
    let rej = s.rejected_indices();
    Ok(SpreadingResult {
        scores: full.scores.select(ndarray::Axis(0), &rej),
        labels: rej.iter().map(|&i| full.labels[i]).collect(),
        confidence: rej.iter().map(|&i| full.confidence[i]).collect(),
        low_confidence: rej.iter().map(|&i| full.low_confidence[i]).collect(),
        converged: full.converged,
        n_iter: full.n_iter,
    })
}

/// Accepted rows plus every reject with its spread label, all with weight 1.
pub fn augment_label_spreading(s: &RejectScenario, cfg: &SpreadingConfig) -> Result<AugmentedTrainingSet> {
    let res = label_spreading(s, cfg)?;
    let mut out = AugmentedTrainingSet::accepted_only(s);
    let rej = s.rejected_indices();
    out.extend(&s.x_pool, &rej, &res.labels, &vec![1.0; rej.len()], Provenance::RejectInferred);
    if !res.converged {
        out.diagnostics.push(format!("label spreading did not converge in {} iterations", res.n_iter));
    }
    let flat = res.low_confidence.iter().filter(|&&l| l).count();
    if flat > 0 {
        out.diagnostics.push(format!("{flat} rejects received no label information"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;

    #[test]
    fn fixed_point_matches_dense_solve() {
        for seed in 0..5 {
            let mut r = crate::rng::from_seed(seed);
            let n = 30;
            let x = Array2::from_shape_fn((n, 2), |_| r.random_range(-1.0..1.0));
            let observed: Vec<Option<u8>> = (0..n)
                .map(|i| if i % 3 == 0 { None } else { Some(r.random_range(0..2)) })
                .collect();
            let cfg = SpreadingConfig {
                k: 4,
                tol: 1e-13,
                max_iter: 100_000,
                ..Default::default()
            };
            let res = spread_labels(x.view(), &observed, &cfg).unwrap();
            assert!(res.converged);
            let s = normalize(&knn_graph(x.view(), 4, 0.5));
            let mut m = DMatrix::<f64>::identity(n, n);
            for (i, row) in s.iter().enumerate() {
                for &(j, w) in row {
                    m[(i, j)] -= cfg.alpha * w;
                }
            }
            let mut f0 = DMatrix::<f64>::zeros(n, 2);
            for (i, y) in observed.iter().enumerate() {
                if let Some(y) = y {
                    f0[(i, *y as usize)] = 1.0 - cfg.alpha;
                }
            }
            let sol = m.lu().solve(&f0).unwrap();
            for i in 0..n {
                for c in 0..2 {
                    assert!((sol[(i, c)] - res.scores[[i, c]]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn graph_is_symmetric_with_min_degree_k() {
        let mut r = crate::rng::from_seed(2);
        let x = Array2::from_shape_fn((40, 3), |_| r.random::<f64>());
        let g = knn_graph(x.view(), 5, 1.0);
        for (i, row) in g.iter().enumerate() {
            assert!(row.len() >= 5);
            for &(j, w) in row {
                assert!(g[j].iter().any(|&(k, v)| k == i && v == w));
            }
        }
    }

    #[test]
    fn separated_clusters_inherit_labels() {
        let mut r = crate::rng::from_seed(3);
        let n = 60;
        let x = Array2::from_shape_fn((n, 2), |(i, _)| {
            let c = if i < n / 2 { 0.0 } else { 50.0 };
            c + r.random::<f64>()
        });
        let observed: Vec<Option<u8>> = (0..n)
            .map(|i| if i % 2 == 0 { Some(u8::from(i >= n / 2)) } else { None })
            .collect();
        let res = spread_labels(x.view(), &observed, &SpreadingConfig::default()).unwrap();
        for i in 0..n {
            assert_eq!(res.labels[i], u8::from(i >= n / 2));
        }
    }

    #[test]
    fn zero_alpha_leaves_unlabelled_rows_flat() {
        let x = Array2::from_shape_fn((6, 1), |(i, _)| i as f64);
        let observed = [Some(1), None, Some(0), None, Some(1), None];
        let cfg = SpreadingConfig {
            alpha: 0.0,
            ..Default::default()
        };
        let res = spread_labels(x.view(), &observed, &cfg).unwrap();
        for i in [1, 3, 5] {
            assert_eq!(res.labels[i], 0);
            assert!(res.low_confidence[i]);
            assert_eq!(res.confidence[i], 0.5);
        }
        assert_eq!(res.labels[0], 1);
    }
}
