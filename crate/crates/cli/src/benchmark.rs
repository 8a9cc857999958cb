//! Tuned learners evaluated on the fixed test set across folds.
//!
//! Each model is tuned once on the first fold's train/validation pair, then refitted
//! with the chosen parameters on every fold's training rows.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use credit_core::learners::Model;
use credit_core::metrics::auc;
use credit_core::tabular::PreprocessPlan;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::prep::prepare;
use crate::report::{fmt, write_csv, write_folds_csv, write_json, FoldRow, RunReport};
use crate::train::{fit, model_seed, ones, par_map, scores, tune_auc, tune_seed, FoldData};
use crate::{CliError, Result};

/// A fitted model with the plan that produces its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub dataset: String,
    pub variant: String,
    pub fold: usize,
    pub params: BTreeMap<String, f64>,
    pub plan: PreprocessPlan,
    pub model: Model,
}

impl ModelArtifact {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn variant(aware: bool) -> &'static str {
    if aware {
        "aware"
    } else {
        "unaware"
    }
}

/// Path of the first-fold artifact `benchmark` writes for a family.
pub fn artifact_path(out: &Path, family: &str, aware: bool) -> PathBuf {
    out.join("models").join(format!("{family}-{}.json", variant(aware)))
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let p = prepare(cfg)?;
    let out = cfg.out_dir();
    std::fs::create_dir_all(out.join("models")).map_err(CliError::io(&out))?;
    let var = variant(cfg.aware);

    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for spec in &cfg.models {
        let name = spec.family.name();
        let first = FoldData::new(&p, 0, cfg.aware)?;
        let params = tune_auc(spec, cfg.tuning.n_trials, tune_seed(cfg.seed, name), &first)?;
        drop(first);
        diagnostics.push(format!("{name} parameters: {params:?}"));
        let fold_rows = par_map(cfg.workers, p.folds.len(), |k| {
            let d = FoldData::new(&p, k, cfg.aware)?;
            let m = fit(spec.family, &params, &d.train, &ones(d.train.y.len()), model_seed(cfg.seed, name, k))?;
            let test_auc = auc(&scores(&m, &d.test.x)?, &d.test.y)?;
            let valid_auc = auc(&scores(&m, &d.valid.x)?, &d.valid.y)?;
            if k == 0 {
                let art = ModelArtifact {
                    dataset: p.profile.name.clone(),
                    variant: var.into(),
                    fold: 0,
                    params: params.clone(),
                    plan: p.plan(0, cfg.aware)?.clone(),
                    model: m,
                };
                write_json(&artifact_path(&out, name, cfg.aware), &art)?;
            }
            Ok(FoldRow {
                model: name.into(),
                variant: var.into(),
                fold: k,
                metrics: [("test_auc".to_string(), test_auc), ("valid_auc".to_string(), valid_auc)].into(),
            })
        })?;
        rows.extend(fold_rows);
    }

    let mut report = RunReport::new("benchmark", &p.profile.name, cfg.hash(), rows);
    report.diagnostics = diagnostics;
    let table: Vec<Vec<String>> = cfg
        .models
        .iter()
        .filter_map(|m| report.get(m.family.name(), var, "test_auc"))
        .map(|a| vec![a.model.clone(), p.profile.name.clone(), fmt(a.mean), fmt(a.std)])
        .collect();
    write_csv(&out.join("benchmark.csv"), &["model", "dataset", "mean_auc", "std_auc"], &table)?;
    write_folds_csv(&out.join("benchmark_folds.csv"), &report.rows)?;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    report.write_json(&out.join("benchmark_report.json"))?;
    Ok(report)
}
