//! Partial dependence and individual conditional expectation curves.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{check_data, check_feature, observed, FeatureKind, OutputScale, Scorer};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub feature: String,
    pub feature_index: usize,
    /// Strictly increasing grid in original units (level indices for categoricals).
    pub grid: Vec<f64>,
    /// Level names of a categorical grid.
    pub grid_labels: Option<Vec<String>>,
    /// Pointwise mean of `ice` (or of every data row for a plain PD curve).
    pub pd: Vec<f64>,
    /// One trajectory per entry of `rows`; empty for a plain PD curve.
    pub ice: Vec<Vec<f64>>,
    pub rows: Vec<usize>,
    pub centered: bool,
    /// Name and per-line values of the feature used to colour ICE lines.
    pub color_by: Option<(String, Vec<f64>)>,
    pub scale: OutputScale,
    pub diagnostics: Vec<String>,
}

/// Type-7 quantile of sorted values.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Distinct quantiles of `values` at the given levels, increasing.
pub(crate) fn quantiles_at(values: &[f64], levels: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if sorted.is_empty() {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = levels.into_iter().map(|q| quantile_sorted(&sorted, q)).collect();
    out.dedup();
    out
}

/// `n_points` evenly spaced quantiles from the minimum to the maximum, duplicates
/// removed.
pub fn numeric_grid(values: &[f64], n_points: usize) -> Vec<f64> {
    match n_points {
        0 => Vec::new(),
        1 => quantiles_at(values, [0.5]),
        n => quantiles_at(values, (0..n).map(|k| k as f64 / (n - 1) as f64)),
    }
}

fn grid_for<S: Scorer + ?Sized>(
    s: &S,
    data: ArrayView2<f64>,
    j: usize,
    grid_size: usize,
) -> Result<(Vec<f64>, Option<Vec<String>>, Vec<String>)> {
    let mut diagnostics = Vec::new();
    let (grid, labels) = match s.feature_kind(j) {
        FeatureKind::Numeric => {
            if grid_size == 0 {
                return Err(Error::invalid("grid size must be positive"));
            }
            let grid = numeric_grid(&observed(data, j), grid_size);
            if grid.is_empty() {
                return Err(Error::invalid(format!(
                    "feature {} has no observed values",
                    s.feature_name(j)
                )));
            }
            if grid.len() == 1 {
                diagnostics.push(format!(
                    "feature {} is constant; curve has a single point",
                    s.feature_name(j)
                ));
            }
            (grid, None)
        }
        FeatureKind::Categorical { levels } => {
            let grid: Vec<f64> = (0..levels).map(|l| l as f64).collect();
            if grid.len() == 1 {
                diagnostics.push(format!("feature {} has a single level", s.feature_name(j)));
            }
            (grid, s.level_names(j))
        }
    };
    Ok((grid, labels, diagnostics))
}

/// Scores of `row` with feature `j` set to every grid value.
fn trajectory<S: Scorer + ?Sized>(s: &S, row: &[f64], j: usize, grid: &[f64]) -> Vec<f64> {
    let mut r = row.to_vec();
    grid.iter()
        .map(|&v| {
            r[j] = v;
            s.score(&r)
        })
        .collect()
}

/// Mean score over `data` with feature `j` fixed at each grid point.
pub fn partial_dependence<S: Scorer + ?Sized>(
    s: &S,
    data: ArrayView2<f64>,
    j: usize,
    grid_size: usize,
) -> Result<CurveSet> {
    check_data(s, data)?;
    check_feature(s, j)?;
    let (grid, grid_labels, diagnostics) = grid_for(s, data, j, grid_size)?;
    let mut pd = vec![0.0; grid.len()];
    for row in data.rows() {
        let t = trajectory(s, &row.to_vec(), j, &grid);
        pd.iter_mut().zip(t).for_each(|(p, v)| *p += v);
    }
    let n = data.nrows() as f64;
    pd.iter_mut().for_each(|p| *p /= n);
    Ok(CurveSet {
        feature: s.feature_name(j),
        feature_index: j,
        grid,
        grid_labels,
        pd,
        ice: Vec::new(),
        rows: Vec::new(),
        centered: false,
        color_by: None,
        scale: s.scale(),
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IceConfig {
    pub grid_size: usize,
    /// Draw at most this many rows (seeded); `None` keeps every row.
    pub max_rows: Option<usize>,
    pub seed: u64,
    pub centered: bool,
    pub color_by: Option<usize>,
}

impl Default for IceConfig {
    fn default() -> Self {
        Self {
            grid_size: 20,
            max_rows: Some(200),
            seed: 0,
            centered: true,
            color_by: None,
        }
    }
}

/// One trajectory per (subsampled) row of `data`; numeric features only.
pub fn ice<S: Scorer + ?Sized>(s: &S, data: ArrayView2<f64>, j: usize, cfg: &IceConfig) -> Result<CurveSet> {
    check_data(s, data)?;
    check_feature(s, j)?;
    if matches!(s.feature_kind(j), FeatureKind::Categorical { .. }) {
        return Err(Error::invalid(format!(
            "ICE needs a numeric feature; use partial dependence for categorical {}",
            s.feature_name(j)
        )));
    }
    if let Some(c) = cfg.color_by {
        check_feature(s, c)?;
    }
    let (grid, _, diagnostics) = grid_for(s, data, j, cfg.grid_size)?;
    let n = data.nrows();
    let rows: Vec<usize> = match cfg.max_rows {
        Some(m) if m < n => {
            let mut r = rng::stream(cfg.seed, "ice-rows");
            let mut idx = rand::seq::index::sample(&mut r, n, m).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    };
    let mut lines: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| trajectory(s, &data.row(i).to_vec(), j, &grid))
        .collect();
    if cfg.centered {
        for line in &mut lines {
            let start = line[0];
            line.iter_mut().for_each(|v| *v -= start);
        }
    }
    let mut pd = vec![0.0; grid.len()];
    for line in &lines {
        pd.iter_mut().zip(line).for_each(|(p, v)| *p += v);
    }
    pd.iter_mut().for_each(|p| *p /= lines.len() as f64);
    let color_by = cfg
        .color_by
        .map(|c| (s.feature_name(c), rows.iter().map(|&i| data[[i, c]]).collect()));
    Ok(CurveSet {
        feature: s.feature_name(j),
        feature_index: j,
        grid,
        grid_labels: None,
        pd,
        ice: lines,
        rows,
        centered: cfg.centered,
        color_by,
        scale: s.scale(),
        diagnostics,
    })
}
