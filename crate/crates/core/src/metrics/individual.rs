//! Individual-fairness measurements.

use ndarray::ArrayView2;

use crate::learners::Predictor;
use crate::{Error, Result};

/// `mean_i (1 − |ŷ_i − mean of ŷ over the k nearest neighbours of i|)`.
///
/// Distances are Euclidean over the columns of `x` except `exclude` (the sensitive
/// column, if present); ties in distance go to the lower row index.
pub fn consistency(
    predictions: &[f64],
    x: ArrayView2<f64>,
    k: usize,
    exclude: Option<usize>,
) -> Result<f64> {
    let n = x.nrows();
    if predictions.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: predictions.len(),
        });
    }
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k must lie in [1, {n}), got {k}")));
    }
    let cols: Vec<usize> = (0..x.ncols()).filter(|&j| Some(j) != exclude).collect();
    let mut total = 0.0;
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        dist.clear();
        let xi = x.row(i);
        for jrow in 0..n {
            if jrow == i {
                continue;
            }
            let xj = x.row(jrow);
            let d: f64 = cols.iter().map(|&c| (xi[c] - xj[c]).powi(2)).sum();
            dist.push((d, jrow));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        dist.select_nth_unstable_by(k - 1, cmp);
        let mean = dist[..k].iter().map(|&(_, j)| predictions[j]).sum::<f64>() / k as f64;
        total += 1.0 - (predictions[i] - mean).abs();
    }
    Ok(total / n as f64)
}

/// Share of rows whose thresholded prediction changes when the binary sensitive
/// column is toggled.
pub fn counterfactual_flip_rate<P: Predictor + ?Sized>(
    m: &P,
    x: ArrayView2<f64>,
    sensitive_col: usize,
    threshold: f64,
) -> Result<f64> {
    if sensitive_col >= x.ncols() {
        return Err(Error::invalid(format!(
            "sensitive column {sensitive_col} is not among the {} features",
            x.ncols()
        )));
    }
    if x.ncols() != m.n_features() {
        return Err(Error::DimensionMismatch {
            expected: m.n_features(),
            actual: x.ncols(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::UndefinedMetric("flip rate of zero rows".into()));
    }
    let mut flips = 0usize;
    for row in x.rows() {
        let mut r = row.to_vec();
        let before = m.predict(&r, threshold);
        r[sensitive_col] = 1.0 - r[sensitive_col];
        if m.predict(&r, threshold) != before {
            flips += 1;
        }
    }
    Ok(flips as f64 / x.nrows() as f64)
}
