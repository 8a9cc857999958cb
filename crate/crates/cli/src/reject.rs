//! Simulated rejection followed by every reject-inference strategy, per seed.

use std::time::Instant;

use credit_core::reject::{run_ri, simulate_rejection, ScenarioConfig};
use credit_core::rng;

use crate::config::ExperimentConfig;
use crate::report::{fmt, fmt_opt, write_csv, write_folds_csv, FoldRow, RunReport};
use crate::train::par_map;
use crate::{CliError, Result};

/// Scenario settings with the threshold, seed and policy features filled in.
pub fn scenario_config(cfg: &ExperimentConfig, policy_features: &[String], seed: u64) -> ScenarioConfig {
    let mut sc = cfg.reject.scenario.clone();
    sc.threshold = cfg.reject.threshold.unwrap_or(sc.threshold);
    if sc.policy_features.is_empty() {
        sc.policy_features = policy_features.to_vec();
    }
    sc.seed = rng::derive_seed(cfg.seed, "reject", seed);
    sc
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let profile = cfg.profile()?;
    let table = profile.load(&cfg.data_dir())?;
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).map_err(CliError::io(&out))?;
    let mut base = cfg.clone();
    if base.reject.threshold.is_none() {
        base.reject.threshold = Some(profile.extra_f64("reject_threshold").unwrap_or(0.4));
    }
    let seeds = &cfg.reject.seeds;

    let per_seed = par_map(cfg.workers, seeds.len(), |i| {
        let sc = scenario_config(&base, &profile.policy_features, seeds[i]);
        let s = simulate_rejection(&table, &sc)?;
        let ri = run_ri(&s, &cfg.reject.strategies, &cfg.reject.ri)?;
        Ok((s.stats, s.policy_features, ri))
    })?;

    let mut rows = Vec::new();
    let mut scenario = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, (stats, policy, ri)) in per_seed.into_iter().enumerate() {
        let seed = seeds[i];
        if i == 0 {
            diagnostics.push(format!("policy features: {}", policy.join(", ")));
        }
        scenario.push(vec![
            seed.to_string(),
            stats.pool_size.to_string(),
            fmt(stats.accept_share),
            fmt(stats.reject_share),
            fmt(stats.accept_default_rate),
            fmt(stats.reject_default_rate),
        ]);
        for r in ri {
            let mut metrics = std::collections::BTreeMap::from([
                ("auc".to_string(), r.auc),
                ("bal_acc".to_string(), r.balanced_accuracy),
                ("ar".to_string(), r.approval_rate),
            ]);
            if let Some(kk) = r.kickout {
                metrics.insert("kk".into(), kk);
            }
            diagnostics.extend(r.diagnostics.iter().map(|d| format!("seed {seed} {}: {d}", r.strategy.code())));
            rows.push(FoldRow {
                model: r.strategy.code().into(),
                variant: "ri".into(),
                fold: seed as usize,
                metrics,
            });
        }
    }

    let mut report = RunReport::new("reject", &profile.name, cfg.hash(), rows);
    report.diagnostics = diagnostics;
    let table_rows: Vec<Vec<String>> = cfg
        .reject
        .strategies
        .iter()
        .map(|k| {
            let mut row = vec![k.code().to_string()];
            for m in ["auc", "bal_acc", "ar", "kk"] {
                let a = report.get(k.code(), "ri", m);
                row.push(fmt_opt(a.map(|a| a.mean)));
                row.push(fmt_opt(a.map(|a| a.std)));
            }
            row
        })
        .collect();
    write_csv(
        &out.join("reject.csv"),
        &["strategy", "auc", "auc_std", "bal_acc", "bal_acc_std", "ar", "ar_std", "kk", "kk_std"],
        &table_rows,
    )?;
    write_csv(
        &out.join("scenario.csv"),
        &["seed", "pool_size", "accept_share", "reject_share", "accept_default_rate", "reject_default_rate"],
        &scenario,
    )?;
    write_folds_csv(&out.join("reject_seeds.csv"), &report.rows)?;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    report.write_json(&out.join("reject_report.json"))?;
    Ok(report)
}
