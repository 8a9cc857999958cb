//! Unaware and aware baselines next to the fairness mitigations.
//!
//! Scores become decisions at the KS threshold of the validation scores. The
//! threshold optimizer is fitted on the validation scores instead. Baseline
//! parameters and mitigation strengths are tuned once on the first fold.

use std::collections::BTreeMap;
use std::time::Instant;

use credit_core::learners::{boost_config, Family, LogisticConfig, Model};
use credit_core::metrics::{auc, balanced_accuracy, fairness_from_predictions, ks_threshold, threshold_predictions};
use credit_core::mitigation::{
    apply_threshold_policy, fit_constrained_logistic, fit_fairgbm, fit_threshold_optimizer, reweigh, tune,
    ConstraintKind, ConstraintSpec, FairGbmSpec, Objective, SearchSpace, TrialScore,
};
use credit_core::rng;

use crate::benchmark::variant;
use crate::config::{ExperimentConfig, Mitigation, ModelSpec};
use crate::prep::prepare;
use crate::report::{fmt_opt, write_csv, write_folds_csv, FoldRow, RunReport};
use crate::train::{fit, model_seed, ones, par_map, scores, tune_auc, tune_seed, FoldData, Part};
use crate::{CliError, Result};

type Metrics = BTreeMap<String, f64>;

/// Balanced accuracy and fairness gaps of hard decisions on `part`.
fn decision_metrics(preds: &[u8], part: &Part) -> Result<Metrics> {
    let r = fairness_from_predictions(preds, &part.y, part.z()?, None)?;
    let mut m = Metrics::new();
    m.insert("bal_acc".into(), balanced_accuracy(preds, &part.y)?);
    for name in ["eod", "dpd", "aod", "apvd"] {
        if let Some(v) = r.metric(name) {
            m.insert(name.into(), v);
        }
    }
    Ok(m)
}

/// Test metrics of a scoring model cut at its validation KS threshold.
fn score_metrics(valid: &[f64], test: &[f64], d: &FoldData) -> Result<Metrics> {
    let t = ks_threshold(valid, &d.valid.y)?;
    let mut m = decision_metrics(&threshold_predictions(test, t), &d.test)?;
    m.insert("auc".into(), auc(test, &d.test.y)?);
    m.insert("threshold".into(), t);
    Ok(m)
}

/// Validation AUC and EOD at the validation KS threshold, for strength tuning.
fn validation_score(valid: &[f64], y: &[u8], z: &[u8]) -> credit_core::Result<TrialScore> {
    let t = ks_threshold(valid, y)?;
    let r = fairness_from_predictions(&threshold_predictions(valid, t), y, z, None)?;
    Ok(TrialScore {
        perf: auc(valid, y)?,
        fair: r.eod,
    })
}

fn logistic_config(params: &BTreeMap<String, f64>) -> LogisticConfig {
    LogisticConfig {
        reg: params.get("reg").copied().unwrap_or(LogisticConfig::default().reg),
        ..Default::default()
    }
}

fn constraint_kind(m: Mitigation) -> ConstraintKind {
    if m == Mitigation::DpClassifier {
        ConstraintKind::DemographicParity
    } else {
        ConstraintKind::EqualOpportunity
    }
}

fn mitigation_name(m: Mitigation) -> &'static str {
    match m {
        Mitigation::Reweighing => "reweighing",
        Mitigation::DpClassifier => "dp_classifier",
        Mitigation::EoClassifier => "eo_classifier",
        Mitigation::Fairgbm => "fairgbm",
        Mitigation::ThresholdOptimizer => "threshold_optimizer",
    }
}

struct Plan {
    families: Vec<Family>,
    params: BTreeMap<(Family, bool), BTreeMap<String, f64>>,
    /// Tuned covariance cap per constrained classifier.
    caps: BTreeMap<Mitigation, f64>,
    fairgbm: Option<FairGbmSpec>,
}

/// One output row: baselines carry their own name as `baseline`.
struct Row {
    model: String,
    variant: String,
    baseline: String,
    metrics: Metrics,
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let p = prepare(cfg)?;
    if p.aware.is_none() {
        return Err(CliError::Config(format!("dataset {} has no sensitive column", p.profile.name)));
    }
    let fc = &cfg.fairness;
    let f_star = fc.f_star.or(p.profile.extra_f64("f_star")).unwrap_or(0.05);
    let objective = Objective::Fairness { f_star, m: fc.penalty };
    let n_mit = fc.n_trials.unwrap_or(cfg.tuning.n_trials);
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).map_err(CliError::io(&out))?;

    let spec_for = |f: Family| cfg.models.iter().find(|m| m.family == f).cloned().unwrap_or_else(|| ModelSpec::new(f));
    let mut families: Vec<Family> = cfg.models.iter().map(|m| m.family).collect();
    let mut needed = families.clone();
    if fc.mitigations.contains(&Mitigation::Reweighing) {
        needed.extend(&fc.reweigh_families);
    }
    if fc.mitigations.iter().any(|m| matches!(m, Mitigation::DpClassifier | Mitigation::EoClassifier)) {
        needed.push(Family::Logistic);
    }
    if fc.mitigations.contains(&Mitigation::Fairgbm) {
        needed.push(Family::Boost);
    }
    needed.sort();
    needed.dedup();
    families.retain(|f| needed.contains(f));

    let first = [FoldData::new(&p, 0, false)?, FoldData::new(&p, 0, true)?];
    let mut params = BTreeMap::new();
    for &f in &needed {
        for aware in [false, true] {
            if aware && !families.contains(&f) {
                continue;
            }
            let name = format!("{}-{}", f.name(), variant(aware));
            let best = tune_auc(&spec_for(f), cfg.tuning.n_trials, tune_seed(cfg.seed, &name), &first[usize::from(aware)])?;
            params.insert((f, aware), best);
        }
    }

    let d0 = &first[0];
    let z0 = d0.train.z()?;
    let zv0 = d0.valid.z()?;
    let w0 = ones(d0.train.y.len());
    let mut caps = BTreeMap::new();
    for m in [Mitigation::DpClassifier, Mitigation::EoClassifier] {
        if !fc.mitigations.contains(&m) {
            continue;
        }
        let lr = logistic_config(&params[&(Family::Logistic, false)]);
        let space: SearchSpace = [("c".to_string(), fc.covariance_space.clone())].into();
        let res = tune(&space, n_mit, tune_seed(cfg.seed, mitigation_name(m)), objective, |q, _| {
            let spec = ConstraintSpec::new(constraint_kind(m), q["c"]);
            let fitted = fit_constrained_logistic(d0.train.x.view(), &d0.train.y, z0, &w0, &spec, &lr)?;
            validation_score(&scores(&Model::Logistic(fitted.model), &d0.valid.x)?, &d0.valid.y, zv0)
        })?;
        caps.insert(m, res.best_params["c"]);
    }
    let fairgbm = if fc.mitigations.contains(&Mitigation::Fairgbm) {
        let bp = &params[&(Family::Boost, false)];
        let space: SearchSpace = [
            ("epsilon".to_string(), fc.fairgbm_epsilon_space.clone()),
            ("step".to_string(), fc.fairgbm_step_space.clone()),
        ]
        .into();
        let res = tune(&space, n_mit, tune_seed(cfg.seed, "fairgbm"), objective, |q, s| {
            let spec = FairGbmSpec {
                kind: ConstraintKind::EqualOpportunity,
                epsilon: q["epsilon"],
                step: q["step"],
            };
            let m = fit_fairgbm(d0.train.x.view(), &d0.train.y, z0, &w0, &boost_config(bp, s)?, &spec)?;
            validation_score(&scores(&Model::Boost(m), &d0.valid.x)?, &d0.valid.y, zv0)
        })?;
        Some(FairGbmSpec {
            kind: ConstraintKind::EqualOpportunity,
            epsilon: res.best_params["epsilon"],
            step: res.best_params["step"],
        })
    } else {
        None
    };
    drop(first);
    let plan = Plan {
        families,
        params,
        caps,
        fairgbm,
    };

    let per_fold = par_map(cfg.workers, p.folds.len(), |k| fold_rows(cfg, &p, &plan, k))?;
    let mut rows = Vec::new();
    let mut baselines: Vec<(String, String, String)> = Vec::new();
    for (k, fold) in per_fold.into_iter().enumerate() {
        for r in fold {
            if k == 0 {
                baselines.push((r.model.clone(), r.variant.clone(), r.baseline.clone()));
            }
            rows.push(FoldRow {
                model: r.model,
                variant: r.variant,
                fold: k,
                metrics: r.metrics,
            });
        }
    }

    let mut report = RunReport::new("fairness", &p.profile.name, cfg.hash(), rows);
    report.diagnostics.push(format!("f_star = {f_star}"));
    for (m, c) in &plan.caps {
        report.diagnostics.push(format!("{} covariance cap {c}", mitigation_name(*m)));
    }
    if let Some(s) = &plan.fairgbm {
        report.diagnostics.push(format!("fairgbm epsilon {} step {}", s.epsilon, s.step));
    }
    let get = |m: &str, v: &str, k: &str| report.get(m, v, k).map(|a| (a.mean, a.std));
    let table: Vec<Vec<String>> = baselines
        .iter()
        .map(|(m, v, b)| {
            let mut row = vec![m.clone(), v.clone(), b.clone()];
            for k in ["bal_acc", "eod", "dpd", "apvd"] {
                let a = get(m, v, k);
                row.push(fmt_opt(a.map(|x| x.0)));
                row.push(fmt_opt(a.map(|x| x.1)));
            }
            for k in ["diff_bal_acc", "diff_eod"] {
                row.push(fmt_opt(get(m, v, k).map(|x| x.0)));
            }
            row.push(fmt_opt(get(m, v, "valid_eod").map(|x| x.0)));
            row
        })
        .collect();
    write_csv(
        &out.join("fairness.csv"),
        &[
            "model",
            "variant",
            "baseline",
            "bal_acc",
            "bal_acc_std",
            "eod",
            "eod_std",
            "dpd",
            "dpd_std",
            "apvd",
            "apvd_std",
            "diff_bal_acc",
            "diff_eod",
            "valid_eod",
        ],
        &table,
    )?;
    write_folds_csv(&out.join("fairness_folds.csv"), &report.rows)?;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    report.write_json(&out.join("fairness_report.json"))?;
    Ok(report)
}

fn fold_rows(cfg: &ExperimentConfig, p: &crate::prep::Prepared, plan: &Plan, k: usize) -> Result<Vec<Row>> {
    let fc = &cfg.fairness;
    let d = [FoldData::new(p, k, false)?, FoldData::new(p, k, true)?];
    let du = &d[0];
    let z = du.train.z()?;
    let w = ones(du.train.y.len());
    let mut rows: Vec<Row> = Vec::new();
    // validation and test scores of the unaware baselines, for the threshold optimizer
    let mut unaware_scores: BTreeMap<Family, (Vec<f64>, Vec<f64>)> = BTreeMap::new();

    for &f in &plan.families {
        for aware in [false, true] {
            let Some(params) = plan.params.get(&(f, aware)) else { continue };
            let part = &d[usize::from(aware)];
            let m = fit(f, params, &part.train, &w, model_seed(cfg.seed, &format!("{}-{}", f.name(), variant(aware)), k))?;
            let (sv, st) = (scores(&m, &part.valid.x)?, scores(&m, &part.test.x)?);
            rows.push(Row {
                model: f.name().into(),
                variant: variant(aware).into(),
                baseline: f.name().into(),
                metrics: score_metrics(&sv, &st, part)?,
            });
            if !aware {
                unaware_scores.insert(f, (sv, st));
            }
        }
    }
    let mut push = |model: String, baseline: Family, metrics: Metrics| {
        rows.push(Row {
            model,
            variant: "unaware".into(),
            baseline: baseline.name().into(),
            metrics,
        })
    };

    for &m in &fc.mitigations {
        match m {
            Mitigation::Reweighing => {
                let (_, rw) = reweigh(&du.train.y, z)?;
                for &f in &fc.reweigh_families {
                    let params = &plan.params[&(f, false)];
                    let name = format!("reweighing+{}", f.name());
                    let model = fit(f, params, &du.train, &rw, model_seed(cfg.seed, &name, k))?;
                    let metrics = score_metrics(&scores(&model, &du.valid.x)?, &scores(&model, &du.test.x)?, du)?;
                    push(name, f, metrics);
                }
            }
            Mitigation::DpClassifier | Mitigation::EoClassifier => {
                let lr = logistic_config(&plan.params[&(Family::Logistic, false)]);
                let spec = ConstraintSpec::new(constraint_kind(m), plan.caps[&m]);
                let fitted = fit_constrained_logistic(du.train.x.view(), &du.train.y, z, &w, &spec, &lr)?;
                let model = Model::Logistic(fitted.model);
                let mut metrics = score_metrics(&scores(&model, &du.valid.x)?, &scores(&model, &du.test.x)?, du)?;
                metrics.insert("covariance".into(), fitted.covariance);
                push(mitigation_name(m).into(), Family::Logistic, metrics);
            }
            Mitigation::Fairgbm => {
                let spec = plan.fairgbm.as_ref().expect("tuned when requested");
                let bc = boost_config(&plan.params[&(Family::Boost, false)], model_seed(cfg.seed, "fairgbm", k))?;
                let model = Model::Boost(fit_fairgbm(du.train.x.view(), &du.train.y, z, &w, &bc, spec)?);
                let metrics = score_metrics(&scores(&model, &du.valid.x)?, &scores(&model, &du.test.x)?, du)?;
                push("fairgbm".into(), Family::Boost, metrics);
            }
            Mitigation::ThresholdOptimizer => {
                for (&f, (sv, st)) in &unaware_scores {
                    let policy = fit_threshold_optimizer(sv, &du.valid.y, du.valid.z()?, fc.threshold_mode)?;
                    let seed = rng::derive_seed(cfg.seed, &format!("threshold-{}", f.name()), k as u64);
                    let valid_preds = apply_threshold_policy(&policy, sv, du.valid.z()?, seed)?;
                    let test_preds = apply_threshold_policy(&policy, st, du.test.z()?, seed ^ 1)?;
                    let mut metrics = decision_metrics(&test_preds, &du.test)?;
                    let valid = decision_metrics(&valid_preds, &du.valid)?;
                    if let Some(v) = valid.get("eod") {
                        metrics.insert("valid_eod".into(), *v);
                    }
                    push(format!("threshold_optimizer+{}", f.name()), f, metrics);
                }
            }
        }
    }
    drop(push);

    // differences against the unaware baseline of the same fold
    let base: BTreeMap<String, Metrics> = rows
        .iter()
        .filter(|r| r.variant == "unaware" && r.model == r.baseline)
        .map(|r| (r.model.clone(), r.metrics.clone()))
        .collect();
    for r in rows.iter_mut().filter(|r| r.model != r.baseline) {
        if let Some(b) = base.get(&r.baseline) {
            for (key, diff) in [("bal_acc", "diff_bal_acc"), ("eod", "diff_eod")] {
                if let (Some(a), Some(bv)) = (r.metrics.get(key), b.get(key)) {
                    let v = a - bv;
                    r.metrics.insert(diff.into(), v);
                }
            }
        }
    }
    Ok(rows)
}
