//! Per-feature split candidates and bin codes for histogram split search.

use ndarray::ArrayView2;

/// Column-major bin codes with the cut points they were derived from.
///
/// A value `v` goes to bin `#{cuts < v}`, so `v <= cuts[k]` exactly when its bin is
/// at most `k`: splitting after bin `k` is the rule `x <= cuts[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMatrix {
    pub cuts: Vec<Vec<f64>>,
    codes: Vec<Vec<u16>>,
    n_rows: usize,
}

/// Midpoints between consecutive distinct values, thinned to at most `max_bins - 1`
/// cuts placed at quantile boundaries.
fn feature_cuts(values: &mut Vec<f64>, max_bins: Option<usize>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in values.iter() {
        match distinct.last_mut() {
            Some((u, c)) if *u == v => *c += 1,
            _ => distinct.push((v, 1)),
        }
    }
    let all = distinct.len().saturating_sub(1);
    let limit = max_bins.map_or(usize::MAX, |b| b.max(2) - 1);
    if all <= limit {
        return distinct.windows(2).map(|w| 0.5 * (w[0].0 + w[1].0)).collect();
    }
    let mut cuts = Vec::with_capacity(limit);
    let mut cum = 0usize;
    let mut level = 1usize;
    for w in distinct.windows(2) {
        cum += w[0].1;
        let target = (level as f64 * n as f64 / (limit + 1) as f64).ceil() as usize;
        if cum >= target {
            cuts.push(0.5 * (w[0].0 + w[1].0));
            while level <= limit
                && (level as f64 * n as f64 / (limit + 1) as f64).ceil() as usize <= cum
            {
                level += 1;
            }
            if level > limit {
                break;
            }
        }
    }
    cuts
}

impl BinnedMatrix {
    /// `max_bins = None` keeps every distinct value in its own bin (exact search).
    pub fn new(x: ArrayView2<f64>, max_bins: Option<usize>) -> Self {
        let (n, d) = x.dim();
        let mut cuts = Vec::with_capacity(d);
        let mut codes = Vec::with_capacity(d);
        for j in 0..d {
            let mut col: Vec<f64> = x.column(j).to_vec();
            let c = feature_cuts(&mut col, max_bins);
            assert!(c.len() < u16::MAX as usize, "too many bins for feature {j}");
            codes.push(
                x.column(j)
                    .iter()
                    .map(|&v| c.partition_point(|&cut| cut < v) as u16)
                    .collect(),
            );
            cuts.push(c);
        }
        Self {
            cuts,
            codes,
            n_rows: n,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.cuts.len()
    }

    pub fn n_bins(&self, j: usize) -> usize {
        self.cuts[j].len() + 1
    }

    pub fn code(&self, j: usize, i: usize) -> usize {
        self.codes[j][i] as usize
    }

    pub(crate) fn column_codes(&self, j: usize) -> &[u16] {
        &self.codes[j]
    }
}
