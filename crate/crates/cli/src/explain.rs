//! Global and local explanations of one fitted model, plus plotting data across folds.
//!
//! All explainers work on original-space rows: numeric values and categorical level
//! indices, as produced by the fold's preprocessing plan.

use std::collections::BTreeMap;
use std::time::Instant;

use credit_core::explain::{
    background_sample, counterfactual_search, diverse_counterfactuals, global_importance, ice, lime_local,
    partial_dependence, rank_agreement, shap_values, Attribution, CounterfactualSet, CurveSet, FeatureImportance,
    FeatureKind, ImportanceKind, LimeExplanation, Pipeline, Scorer,
};
use credit_core::learners::{Family, Model};
use credit_core::rng;
use credit_core::tabular::{ColumnKind, PreprocessPlan};
use ndarray::Array2;
use serde::Serialize;

use crate::benchmark::{variant, ModelArtifact};
use crate::config::{ExperimentConfig, RowSelector};
use crate::prep::{prepare, Prepared};
use crate::report::{fmt, fmt_opt, write_csv, write_json, FoldRow, RunReport};
use crate::train::{fit, model_seed, ones, par_map, scores, tune_auc, tune_seed, FoldData, Part};
use crate::{CliError, Result};

/// A model with the plan and original-space data of its fold.
struct Explained {
    plan: PreprocessPlan,
    model: Model,
    /// Training rows in original space, for backgrounds and grids.
    train: Array2<f64>,
    /// Test rows in original space.
    test: Array2<f64>,
    /// Test rows in model space.
    test_x: Array2<f64>,
    test_y: Vec<u8>,
}

impl Explained {
    fn pipeline(&self) -> Result<Pipeline<'_, Model>> {
        Ok(Pipeline::new(&self.plan, &self.model)?)
    }
}

fn original(p: &Prepared, plan: &PreprocessPlan, rows: &[usize]) -> Result<Array2<f64>> {
    Ok(plan.to_original(&p.table.select_rows(rows))?)
}

/// Tunes `family` on the first fold unless the spec fixes every parameter.
fn tuned(cfg: &ExperimentConfig, p: &Prepared, spec: &crate::config::ModelSpec) -> Result<BTreeMap<String, f64>> {
    let name = format!("explain-{}", spec.family.name());
    tune_auc(spec, cfg.tuning.n_trials, tune_seed(cfg.seed, &name), &FoldData::new(p, 0, cfg.aware)?)
}

fn fit_on_fold(cfg: &ExperimentConfig, p: &Prepared, family: Family, params: &BTreeMap<String, f64>, fold: usize) -> Result<Explained> {
    let d = FoldData::new(p, fold, cfg.aware)?;
    let model = fit(family, params, &d.train, &ones(d.train.y.len()), model_seed(cfg.seed, family.name(), fold))?;
    let plan = p.plan(fold, cfg.aware)?.clone();
    let f = &p.folds[fold];
    Ok(Explained {
        train: original(p, &plan, &f.train)?,
        test: original(p, &plan, &f.test)?,
        test_x: d.test.x,
        test_y: d.test.y,
        plan,
        model,
    })
}

fn load_model(cfg: &ExperimentConfig, p: &Prepared) -> Result<(Explained, String)> {
    let ec = &cfg.explain;
    if let Some(path) = &ec.artifact {
        let art = ModelArtifact::load(path)?;
        if art.dataset != p.profile.name {
            return Err(CliError::Config(format!(
                "artifact {} was fitted on {}, not {}",
                path.display(),
                art.dataset,
                p.profile.name
            )));
        }
        let f = &p.folds[art.fold];
        let test = Part::new(&art.plan, &p.table, &f.test)?;
        let e = Explained {
            train: original(p, &art.plan, &f.train)?,
            test: original(p, &art.plan, &f.test)?,
            test_x: test.x,
            test_y: test.y,
            plan: art.plan,
            model: art.model,
        };
        let name = e.model.family().to_string();
        return Ok((e, name));
    }
    let params = tuned(cfg, p, &ec.model)?;
    Ok((fit_on_fold(cfg, p, ec.model.family, &params, ec.fold)?, ec.model.family.name().to_string()))
}

/// Position of the selected row among the test rows.
fn select_row(sel: RowSelector, test_scores: &[f64], y: &[u8], threshold: f64) -> Result<usize> {
    let found = match sel {
        RowSelector::Index(i) => (i < y.len()).then_some(i),
        RowSelector::FirstDenied => test_scores.iter().position(|&s| s >= threshold),
        RowSelector::FirstMisclassifiedDefault => (0..y.len()).find(|&i| y[i] == 1 && test_scores[i] < threshold),
    };
    found.ok_or_else(|| CliError::Config(format!("no test row matches {sel:?} at threshold {threshold}")))
}

/// Default mutable inputs: numeric and binary categorical, never the sensitive one
/// nor those in `fixed`.
fn default_mutable<S: Scorer>(s: &S, fixed: &[usize]) -> Vec<usize> {
    (0..s.n_inputs())
        .filter(|&j| !s.is_immutable(j) && !fixed.contains(&j))
        .filter(|&j| match s.feature_kind(j) {
            FeatureKind::Numeric => true,
            FeatureKind::Categorical { levels } => levels <= 2,
        })
        .collect()
}

fn resolve(plan: &PreprocessPlan, names: &[String]) -> Result<Vec<usize>> {
    let inputs = plan.input_names();
    names
        .iter()
        .map(|n| {
            inputs
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| CliError::Config(format!("unknown feature {n:?}")))
        })
        .collect()
}

fn curve_features(cfg: &ExperimentConfig, plan: &PreprocessPlan) -> Result<Vec<usize>> {
    if cfg.explain.curve_features.is_empty() {
        Ok((0..plan.n_inputs())
            .filter(|&j| plan.input_kind(j) == ColumnKind::Numeric)
            .take(3)
            .collect())
    } else {
        resolve(plan, &cfg.explain.curve_features)
    }
}

fn importance_kinds(model: &Model) -> [ImportanceKind; 2] {
    match model {
        Model::Logistic(_) => [ImportanceKind::LrCoefficients, ImportanceKind::MeanAbsShap],
        _ => [ImportanceKind::SplitCounts, ImportanceKind::MeanAbsShap],
    }
}

fn kind_name(k: ImportanceKind) -> &'static str {
    match k {
        ImportanceKind::LrCoefficients => "lr_coefficients",
        ImportanceKind::SplitCounts => "split_counts",
        ImportanceKind::MeanAbsShap => "mean_abs_shap",
    }
}

fn importances(cfg: &ExperimentConfig, e: &Explained, seed: u64) -> Result<Vec<(ImportanceKind, Vec<FeatureImportance>)>> {
    let bg = background_sample(e.train.view(), cfg.explain.n_background, seed);
    importance_kinds(&e.model)
        .into_iter()
        .map(|k| Ok((k, global_importance(&e.plan, &e.model, k, bg.view(), &cfg.explain.importance)?)))
        .collect()
}

fn importance_rows(model: &str, fold: Option<usize>, imp: &[(ImportanceKind, Vec<FeatureImportance>)]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for (k, list) in imp {
        for (rank, f) in list.iter().enumerate() {
            let mut row = vec![model.to_string()];
            if let Some(fold) = fold {
                row.push(fold.to_string());
            }
            row.extend([
                kind_name(*k).to_string(),
                (rank + 1).to_string(),
                f.feature.clone(),
                fmt(f.importance),
                fmt_opt(f.signed),
            ]);
            out.push(row);
        }
    }
    out
}

fn curves(cfg: &ExperimentConfig, e: &Explained, seed: u64) -> Result<Vec<(CurveSet, Option<CurveSet>)>> {
    let s = e.pipeline()?;
    let color_by = match &cfg.explain.color_by {
        Some(n) => Some(resolve(&e.plan, std::slice::from_ref(n))?[0]),
        None => None,
    };
    curve_features(cfg, &e.plan)?
        .into_iter()
        .map(|j| {
            let pd = partial_dependence(&s, e.test.view(), j, cfg.explain.grid_size)?;
            let ice_curves = if s.feature_kind(j) == FeatureKind::Numeric {
                let ic = credit_core::explain::IceConfig {
                    grid_size: cfg.explain.grid_size,
                    seed,
                    color_by,
                    ..cfg.explain.ice.clone()
                };
                Some(ice(&s, e.test.view(), j, &ic)?)
            } else {
                None
            };
            Ok((pd, ice_curves))
        })
        .collect()
}

fn grid_label(c: &CurveSet, i: usize) -> String {
    c.grid_labels.as_ref().map(|l| l[i].clone()).unwrap_or_default()
}

fn pd_rows(model: &str, c: &CurveSet) -> Vec<Vec<String>> {
    (0..c.grid.len())
        .map(|i| vec![model.to_string(), c.feature.clone(), fmt(c.grid[i]), grid_label(c, i), fmt(c.pd[i])])
        .collect()
}

fn ice_rows(model: &str, c: &CurveSet) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for (line, (&row, values)) in c.rows.iter().zip(&c.ice).enumerate() {
        let color = c.color_by.as_ref().map(|(_, v)| fmt(v[line])).unwrap_or_default();
        for (i, v) in values.iter().enumerate() {
            out.push(vec![
                model.to_string(),
                c.feature.clone(),
                row.to_string(),
                color.clone(),
                fmt(c.grid[i]),
                fmt(*v),
            ]);
        }
    }
    out
}

const PD_HEADER: [&str; 5] = ["model", "feature", "grid", "grid_label", "pd"];
const ICE_HEADER: [&str; 6] = ["model", "feature", "row", "color_value", "grid", "value"];

fn cf_rows(kind: &str, set: &CounterfactualSet) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for (id, c) in set.counterfactuals.iter().enumerate() {
        for ch in &c.changes {
            out.push(vec![
                kind.to_string(),
                id.to_string(),
                ch.feature.clone(),
                fmt(ch.from),
                fmt(ch.to),
                fmt(c.score),
                c.outcome.to_string(),
                c.n_changes.to_string(),
                fmt(c.max_relative_change),
                fmt(c.distance),
            ]);
        }
    }
    out
}

/// SHAP and LIME attributions for one row, side by side.
#[derive(Debug, Serialize)]
struct LocalReport {
    row: usize,
    label: u8,
    score: f64,
    shap: Attribution,
    lime: LimeExplanation,
    /// Spearman agreement of the absolute attributions.
    rank_agreement: Option<f64>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let p = prepare(cfg)?;
    let ec = &cfg.explain;
    let dir = cfg.out_dir().join("explain");
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let (e, name) = load_model(cfg, &p)?;
    let s = e.pipeline()?;
    let seed = |what: &str| rng::derive_seed(cfg.seed, &format!("explain-{what}"), 0);
    let mut diagnostics = Vec::new();

    let imp = importances(cfg, &e, seed("importance"))?;
    write_csv(
        &dir.join("importance.csv"),
        &["model", "kind", "rank", "feature", "importance", "signed"],
        &importance_rows(&name, None, &imp),
    )?;

    let mut pd = Vec::new();
    let mut ice_out = Vec::new();
    for (c, i) in curves(cfg, &e, seed("ice"))? {
        diagnostics.extend(c.diagnostics.iter().cloned());
        pd.extend(pd_rows(&name, &c));
        if let Some(i) = i {
            ice_out.extend(ice_rows(&name, &i));
        }
    }
    write_csv(&dir.join("pd.csv"), &PD_HEADER, &pd)?;
    write_csv(&dir.join("ice.csv"), &ICE_HEADER, &ice_out)?;

    let test_scores = scores(&e.model, &e.test_x)?;
    let threshold = ec.counterfactual.threshold;
    let bg = background_sample(e.train.view(), ec.n_background, seed("background"));
    let r = select_row(ec.rows, &test_scores, &e.test_y, threshold)?;
    let row = e.test.row(r).to_vec();
    let shap = shap_values(&s, &row, bg.view(), &ec.shap)?;
    let lime = lime_local(&s, &row, e.train.view(), &ec.lime)?;
    let agreement = rank_agreement(&shap.contributions, &lime.coefficients);
    let local = LocalReport {
        row: r,
        label: e.test_y[r],
        score: test_scores[r],
        shap,
        lime,
        rank_agreement: agreement,
    };
    write_json(&dir.join("local.json"), &local)?;

    let mutable = if ec.mutable.is_empty() {
        // profile key `immutable`: comma-separated inputs applicants cannot act on
        let fixed: Vec<String> = p
            .profile
            .extra
            .get("immutable")
            .map(|v| v.split(',').map(|n| n.trim().to_string()).filter(|n| !n.is_empty()).collect())
            .unwrap_or_default();
        default_mutable(&s, &resolve(&e.plan, &fixed)?)
    } else {
        resolve(&e.plan, &ec.mutable)?
    };
    let cr = select_row(ec.counterfactual_row, &test_scores, &e.test_y, threshold)?;
    let cf_row = e.test.row(cr).to_vec();
    let cf_cfg = credit_core::explain::CounterfactualConfig {
        mutable: mutable.clone(),
        ..ec.counterfactual.clone()
    };
    let pareto = counterfactual_search(&s, &cf_row, e.train.view(), &cf_cfg)?;
    let dv_cfg = credit_core::explain::DiverseConfig {
        mutable,
        seed: seed("diverse"),
        ..ec.diverse.clone()
    };
    let diverse = diverse_counterfactuals(&s, &cf_row, e.train.view(), &dv_cfg)?;
    diagnostics.extend(pareto.diagnostics.iter().chain(&diverse.diagnostics).cloned());
    let mut cf = cf_rows("pareto", &pareto);
    cf.extend(cf_rows("diverse", &diverse));
    write_csv(
        &dir.join("counterfactuals.csv"),
        &[
            "kind",
            "id",
            "feature",
            "from",
            "to",
            "score",
            "outcome",
            "n_changes",
            "max_relative_change",
            "distance",
        ],
        &cf,
    )?;

    let mut metrics = BTreeMap::from([
        ("local_row".to_string(), r as f64),
        ("counterfactual_row".to_string(), cr as f64),
        ("pareto_count".to_string(), pareto.counterfactuals.len() as f64),
        ("diverse_count".to_string(), diverse.counterfactuals.len() as f64),
    ]);
    if let Some(a) = agreement {
        metrics.insert("rank_agreement".into(), a);
    }
    let rows = vec![FoldRow {
        model: name,
        variant: variant(cfg.aware).into(),
        fold: ec.fold,
        metrics,
    }];
    let mut report = RunReport::new("explain", &p.profile.name, cfg.hash(), rows);
    report.diagnostics = diagnostics;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    report.write_json(&dir.join("explain_report.json"))?;
    Ok(report)
}

/// Importances of each plotted family on every fold, and fold-0 curves.
pub fn plot_data(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let p = prepare(cfg)?;
    let dir = cfg.out_dir().join("plots");
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let mut imp_rows = Vec::new();
    let mut pd = Vec::new();
    let mut ice_out = Vec::new();
    let mut rows = Vec::new();
    for &family in &cfg.explain.plot_families {
        let spec = cfg
            .models
            .iter()
            .find(|m| m.family == family)
            .cloned()
            .unwrap_or_else(|| crate::config::ModelSpec::new(family));
        let params = tuned(cfg, &p, &spec)?;
        let name = family.name();
        let per_fold = par_map(cfg.workers, p.folds.len(), |k| {
            let e = fit_on_fold(cfg, &p, family, &params, k)?;
            let seed = rng::derive_seed(cfg.seed, &format!("plot-{name}"), k as u64);
            let imp = importances(cfg, &e, seed)?;
            let c = if k == 0 { Some(curves(cfg, &e, seed)?) } else { None };
            Ok((imp, c))
        })?;
        let names = p.plan(0, cfg.aware)?.input_names();
        let mut first_imp: Option<Vec<f64>> = None;
        for (k, (imp, c)) in per_fold.into_iter().enumerate() {
            imp_rows.extend(importance_rows(name, Some(k), &imp));
            // stability of the Shapley ranking against the first fold
            let by_name: BTreeMap<&str, f64> = imp[1].1.iter().map(|f| (f.feature.as_str(), f.importance)).collect();
            let v: Vec<f64> = names.iter().map(|n| by_name.get(n.as_str()).copied().unwrap_or(0.0)).collect();
            let mut metrics = BTreeMap::new();
            match &first_imp {
                None => first_imp = Some(v),
                Some(f0) => {
                    if let Some(a) = rank_agreement(f0, &v) {
                        metrics.insert("rank_agreement_fold0".to_string(), a);
                    }
                }
            }
            rows.push(FoldRow {
                model: name.into(),
                variant: variant(cfg.aware).into(),
                fold: k,
                metrics,
            });
            for (pc, ic) in c.into_iter().flatten() {
                pd.extend(pd_rows(name, &pc));
                if let Some(ic) = ic {
                    ice_out.extend(ice_rows(name, &ic));
                }
            }
        }
    }
    write_csv(
        &dir.join("importance_folds.csv"),
        &["model", "fold", "kind", "rank", "feature", "importance", "signed"],
        &imp_rows,
    )?;
    write_csv(&dir.join("pd.csv"), &PD_HEADER, &pd)?;
    write_csv(&dir.join("ice.csv"), &ICE_HEADER, &ice_out)?;
    let mut report = RunReport::new("plot-data", &p.profile.name, cfg.hash(), rows);
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    report.write_json(&dir.join("plot_report.json"))?;
    Ok(report)
}
