//! Run reports and deterministic CSV output.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

/// Metrics of one model variant on one fold (or one seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub model: String,
    pub variant: String,
    pub fold: usize,
    /// Undefined metrics are left out.
    pub metrics: BTreeMap<String, f64>,
}

/// Mean and sample standard deviation of one metric over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub model: String,
    pub variant: String,
    pub metric: String,
    pub mean: f64,
    /// Zero when only one fold has the metric.
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub dataset: String,
    pub config_hash: String,
    pub version: String,
    pub wall_clock_secs: f64,
    pub rows: Vec<FoldRow>,
    pub aggregates: Vec<Aggregate>,
    pub diagnostics: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, dataset: &str, config_hash: String, rows: Vec<FoldRow>) -> Self {
        let aggregates = aggregate(&rows);
        Self {
            command: command.into(),
            dataset: dataset.into(),
            config_hash,
            version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_secs: 0.0,
            rows,
            aggregates,
            diagnostics: Vec::new(),
        }
    }

    pub fn get(&self, model: &str, variant: &str, metric: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.model == model && a.variant == variant && a.metric == metric)
    }

    /// Per-fold values of one metric, in fold order.
    pub fn fold_values(&self, model: &str, variant: &str, metric: &str) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.model == model && r.variant == variant)
            .filter_map(|r| r.metrics.get(metric).map(|v| (r.fold, *v)))
            .collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Groups rows by (model, variant) in first-seen order and metrics by name.
pub fn aggregate(rows: &[FoldRow]) -> Vec<Aggregate> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let k = (r.model.clone(), r.variant.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut out = Vec::new();
    for (model, variant) in keys {
        let mut by_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.model == model && r.variant == variant) {
            for (k, v) in &r.metrics {
                by_metric.entry(k).or_default().push(*v);
            }
        }
        for (metric, v) in by_metric {
            let (mean, std) = mean_std(&v);
            out.push(Aggregate {
                model: model.clone(),
                variant: variant.clone(),
                metric: metric.to_string(),
                mean,
                std,
                n: v.len(),
            });
        }
    }
    out
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Core(e.into()))?;
    std::fs::write(path, text + "\n").map_err(CliError::io(path))
}

/// Writes a CSV with a header row; values are written as given.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Core(e.into()))?;
    let io = |e: csv::Error| CliError::Core(e.into());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(CliError::io(path))
}

/// Fixed six-decimal rendering used in every CSV body.
pub fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Per-fold rows as a long CSV: model, variant, fold, metric, value.
pub fn write_folds_csv(path: &Path, rows: &[FoldRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .flat_map(|r| {
            r.metrics.iter().map(move |(k, v)| {
                vec![r.model.clone(), r.variant.clone(), r.fold.to_string(), k.clone(), fmt(*v)]
            })
        })
        .collect();
    write_csv(path, &["model", "variant", "fold", "metric", "value"], &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: &str, fold: usize, auc: f64) -> FoldRow {
        FoldRow {
            model: model.into(),
            variant: "unaware".into(),
            fold,
            metrics: [("auc".to_string(), auc)].into(),
        }
    }

    #[test]
    fn aggregates_match_recomputation() {
        let rows = vec![row("a", 0, 0.7), row("a", 1, 0.8), row("b", 0, 0.5), row("a", 2, 0.9)];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].model, "a");
        assert!((agg[0].mean - 0.8).abs() < 1e-12);
        assert!((agg[0].std - 0.1).abs() < 1e-12);
        assert_eq!(agg[1].std, 0.0);
        assert_eq!(agg[1].n, 1);
    }
}
