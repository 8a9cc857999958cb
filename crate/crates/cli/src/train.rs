use std::collections::BTreeMap;

use credit_core::learners::{fit_family, predict_proba_batch, Family, Model};
use credit_core::metrics::auc;
use credit_core::mitigation::{tune, Objective, TrialScore};
use credit_core::rng;
use credit_core::tabular::{apply_preprocess, PreprocessPlan, Table};
use ndarray::Array2;
use rayon::prelude::*;

use crate::config::ModelSpec;
use crate::prep::Prepared;
use crate::{CliError, Result};

/// One part of a fold in model space.
pub(crate) struct Part {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub z: Option<Vec<u8>>,
}

impl Part {
    pub fn new(plan: &PreprocessPlan, table: &Table, rows: &[usize]) -> Result<Self> {
        let t = table.select_rows(rows);
        Ok(Self {
            x: apply_preprocess(plan, &t)?.x,
            y: t.labels().to_vec(),
            z: t.sensitive().map(<[u8]>::to_vec),
        })
    }

    pub fn z(&self) -> Result<&[u8]> {
        self.z
            .as_deref()
            .ok_or_else(|| CliError::Config("this command needs a sensitive column in the profile".into()))
    }
}

pub(crate) struct FoldData {
    pub train: Part,
    pub valid: Part,
    pub test: Part,
}

impl FoldData {
    pub fn new(p: &Prepared, fold: usize, aware: bool) -> Result<Self> {
        let plan = p.plan(fold, aware)?;
        let f = &p.folds[fold];
        Ok(Self {
            train: Part::new(plan, &p.table, &f.train)?,
            valid: Part::new(plan, &p.table, &f.valid)?,
            test: Part::new(plan, &p.table, &f.test)?,
        })
    }
}

pub(crate) fn ones(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

pub(crate) fn merge(fixed: &BTreeMap<String, f64>, sampled: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut out = fixed.clone();
    out.extend(sampled.iter().map(|(k, v)| (k.clone(), *v)));
    out
}

pub(crate) fn scores(m: &Model, x: &Array2<f64>) -> credit_core::Result<Vec<f64>> {
    predict_proba_batch(m, x.view())
}

/// Best parameters by validation AUC; fixed parameters when the space is empty.
pub(crate) fn tune_auc(spec: &ModelSpec, n_trials: usize, seed: u64, d: &FoldData) -> Result<BTreeMap<String, f64>> {
    let space = spec.search_space();
    if space.is_empty() {
        return Ok(spec.params.clone());
    }
    let w = ones(d.train.y.len());
    let res = tune(&space, n_trials, seed, Objective::Auc, |p, s| {
        let m = fit_family(spec.family, &merge(&spec.params, p), d.train.x.view(), &d.train.y, &w, s)?;
        Ok(TrialScore {
            perf: auc(&scores(&m, &d.valid.x)?, &d.valid.y)?,
            fair: None,
        })
    })?;
    Ok(merge(&spec.params, &res.best_params))
}

pub(crate) fn fit(family: Family, params: &BTreeMap<String, f64>, part: &Part, w: &[f64], seed: u64) -> Result<Model> {
    Ok(fit_family(family, params, part.x.view(), &part.y, w, seed)?)
}

pub(crate) fn model_seed(root: u64, name: &str, fold: usize) -> u64 {
    rng::derive_seed(root, &format!("model-{name}"), fold as u64)
}

pub(crate) fn tune_seed(root: u64, name: &str) -> u64 {
    rng::derive_seed(root, &format!("tune-{name}"), 0)
}

/// Runs `f` over `0..n` on `workers` threads, keeping index order.
pub(crate) fn par_map<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}
