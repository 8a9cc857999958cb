//! Seeded random hyperparameter search.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::objective::fairness_objective;
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Distribution of one hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamDist {
    LogUniform { low: f64, high: f64 },
    Uniform { low: f64, high: f64 },
    /// Integer in `[low, high]`, stored as `f64`.
    Int { low: i64, high: i64 },
    Choice { values: Vec<f64> },
}

impl ParamDist {
    /// Rejects empty or inverted ranges.
    pub fn check(&self, name: &str) -> Result<()> {
        let ok = match self {
            Self::LogUniform { low, high } => *low > 0.0 && low <= high && high.is_finite(),
            Self::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Self::Int { low, high } => low <= high,
            Self::Choice { values } => !values.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid distribution for parameter {name}")))
        }
    }

    fn sample(&self, r: &mut Rng) -> f64 {
        match self {
            Self::LogUniform { low, high } => {
                if low == high {
                    *low
                } else {
                    r.random_range(low.ln()..=high.ln()).exp()
                }
            }
            Self::Uniform { low, high } => {
                if low == high {
                    *low
                } else {
                    r.random_range(*low..=*high)
                }
            }
            Self::Int { low, high } => r.random_range(*low..=*high) as f64,
            Self::Choice { values } => values[r.random_range(0..values.len())],
        }
    }
}

pub type SearchSpace = BTreeMap<String, ParamDist>;

/// Draws one configuration; parameters are sampled in name order.
pub fn sample_params(space: &SearchSpace, r: &mut Rng) -> BTreeMap<String, f64> {
    space.iter().map(|(k, d)| (k.clone(), d.sample(r))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Objective {
    /// Validation AUC.
    Auc,
    /// AUC penalized by `m` per unit of fairness metric above `f_star`.
    Fairness { f_star: f64, m: f64 },
}

/// Validation outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    pub perf: f64,
    /// Fairness metric value, required by [`Objective::Fairness`].
    pub fair: Option<f64>,
}

impl Objective {
    pub fn score(&self, s: &TrialScore) -> Result<f64> {
        match self {
            Self::Auc => Ok(s.perf),
            Self::Fairness { f_star, m } => {
                let fair = s.fair.ok_or_else(|| Error::UndefinedMetric("fairness metric missing".into()))?;
                Ok(fairness_objective(s.perf, fair, *f_star, *m))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: BTreeMap<String, f64>,
    /// Seed handed to the evaluation closure.
    pub seed: u64,
    pub perf: Option<f64>,
    pub fair: Option<f64>,
    pub objective: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    /// Index of the best trial.
    pub best: usize,
    pub best_params: BTreeMap<String, f64>,
    pub best_objective: f64,
    pub trials: Vec<Trial>,
}

/// Evaluates `n_trials` sampled configurations with `eval(params, trial_seed)` and
/// returns the one with the highest objective (the earliest on ties).
pub fn tune<F>(
    space: &SearchSpace,
    n_trials: usize,
    seed: u64,
    objective: Objective,
    mut eval: F,
) -> Result<TuneResult>
where
    F: FnMut(&BTreeMap<String, f64>, u64) -> Result<TrialScore>,
{
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be at least 1"));
    }
    for (k, d) in space {
        d.check(k)?;
    }
    let mut trials = Vec::with_capacity(n_trials);
    let mut best: Option<(usize, f64)> = None;
    for t in 0..n_trials {
        let mut r = rng::substream(seed, "tune", t as u64);
        let params = sample_params(space, &mut r);
        let trial_seed = rng::derive_seed(seed, "tune-model", t as u64);
        let outcome = eval(&params, trial_seed).and_then(|s| {
            let o = objective.score(&s)?;
            if o.is_nan() {
                return Err(Error::UndefinedMetric("objective is NaN".into()));
            }
            Ok((s, o))
        });
        let trial = match outcome {
            Ok((s, o)) => {
                if best.is_none_or(|(_, b)| o > b) {
                    best = Some((t, o));
                }
                Trial {
                    index: t,
                    params,
                    seed: trial_seed,
                    perf: Some(s.perf),
                    fair: s.fair,
                    objective: Some(o),
                    error: None,
                }
            }
            Err(e) => {
                log::warn!("trial {t} failed: {e}");
                Trial {
                    index: t,
                    params,
                    seed: trial_seed,
                    perf: None,
                    fair: None,
                    objective: None,
                    error: Some(e.to_string()),
                }
            }
        };
        trials.push(trial);
    }
    match best {
        Some((b, o)) => Ok(TuneResult {
            best: b,
            best_params: trials[b].params.clone(),
            best_objective: o,
            trials,
        }),
        None => Err(Error::AllTrialsFailed {
            n_trials,
            first: trials[0].error.clone().unwrap_or_default(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> SearchSpace {
        let mut s = SearchSpace::new();
        s.insert("reg".into(), ParamDist::LogUniform { low: 1e-4, high: 10.0 });
        s.insert("depth".into(), ParamDist::Int { low: 2, high: 6 });
        s.insert("rate".into(), ParamDist::Choice { values: vec![0.05, 0.1] });
        s
    }

    #[test]
    fn samples_stay_in_range() {
        let mut r = rng::from_seed(0);
        for _ in 0..200 {
            let p = sample_params(&space(), &mut r);
            assert!((1e-4..=10.0).contains(&p["reg"]));
            assert!((2.0..=6.0).contains(&p["depth"]) && p["depth"].fract() == 0.0);
            assert!(p["rate"] == 0.05 || p["rate"] == 0.1);
        }
    }

    #[test]
    fn constant_objective_keeps_first_trial() {
        let res = tune(&space(), 5, 1, Objective::Auc, |_, _| {
            Ok(TrialScore { perf: 0.7, fair: None })
        })
        .unwrap();
        assert_eq!(res.best, 0);
        assert_eq!(res.trials.len(), 5);
    }

    #[test]
    fn picks_max_and_is_deterministic() {
        let run = || {
            tune(&space(), 10, 4, Objective::Auc, |p, _| {
                Ok(TrialScore { perf: -(p["reg"].ln() - 0.0).abs(), fair: None })
            })
            .unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        let best = a.trials.iter().map(|t| t.objective.unwrap()).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.best_objective, best);
    }

    #[test]
    fn fairness_objective_penalizes() {
        let mut calls = 0;
        let res = tune(&space(), 2, 0, Objective::Fairness { f_star: 0.05, m: 100.0 }, |_, _| {
            calls += 1;
            let unfair = calls == 1;
            Ok(TrialScore {
                perf: if unfair { 0.9 } else { 0.7 },
                fair: Some(if unfair { 0.2 } else { 0.0 }),
            })
        })
        .unwrap();
        assert_eq!(res.best, 1);
        assert!((res.trials[0].objective.unwrap() + 14.1).abs() < 1e-9);
        assert!(tune(&space(), 1, 0, Objective::Fairness { f_star: 0.05, m: 100.0 }, |_, _| {
            Ok(TrialScore { perf: 0.7, fair: None })
        })
        .is_err());
    }

    #[test]
    fn all_failed_carries_diagnostic() {
        let err = tune(&space(), 3, 0, Objective::Auc, |_, _| Err(Error::invalid("boom"))).unwrap_err();
        assert!(err.to_string().contains("boom"), "{err}");
    }
}
