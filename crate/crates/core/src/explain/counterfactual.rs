//! Counterfactual explanations over discretized action grids.
//!
//! Numeric features may move to quantile steps of their observed distribution,
//! binary categoricals may toggle. [`counterfactual_search`] returns the Pareto
//! front of (number of changes, largest relative change) by branch and bound;
//! [`diverse_counterfactuals`] trades validity, proximity and diversity by local
//! search.

use ndarray::ArrayView2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::curves::quantiles_at;
use super::{check_data, check_feature, check_width, column_moments, observed, FeatureKind, OutputScale, Scorer};
use crate::rng;
use crate::{Error, Result};

const REL_EPS: f64 = 1e-9;

/// `|to − from| / (|from| + ε)`; a missing reference counts as a change of 1.
pub fn relative_change(from: f64, to: f64) -> f64 {
    if from.is_nan() {
        1.0
    } else {
        (to - from).abs() / (from.abs() + REL_EPS)
    }
}

/// Candidate values for one mutable feature, excluding the reference value,
/// ordered by relative change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    pub feature: usize,
    pub values: Vec<f64>,
    /// Relative change of each value (1 for a categorical toggle).
    pub costs: Vec<f64>,
    pub categorical: bool,
    /// Spread used to normalize distances (1 for categoricals).
    pub scale: f64,
}

impl ActionGrid {
    fn step(&self, from: f64, to: f64) -> f64 {
        if self.categorical {
            f64::from(u8::from(from != to))
        } else if from.is_nan() || to.is_nan() {
            f64::from(u8::from(from.is_nan() != to.is_nan()))
        } else {
            (to - from).abs() / self.scale
        }
    }
}

/// Per-feature action grids: `n_steps` inner quantiles for numeric features, the
/// other level for binary categoricals.
pub fn action_grids<S: Scorer + ?Sized>(
    s: &S,
    row: &[f64],
    data: ArrayView2<f64>,
    mutable: &[usize],
    n_steps: usize,
) -> Result<Vec<ActionGrid>> {
    check_width(s, row.len())?;
    check_data(s, data)?;
    let mut seen = vec![false; s.n_inputs()];
    let mut out = Vec::with_capacity(mutable.len());
    for &j in mutable {
        check_feature(s, j)?;
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::invalid(format!("feature {} listed twice as mutable", s.feature_name(j))));
        }
        if s.is_immutable(j) {
            return Err(Error::invalid(format!("feature {} is immutable", s.feature_name(j))));
        }
        let grid = match s.feature_kind(j) {
            FeatureKind::Categorical { levels } if levels > 2 => {
                return Err(Error::invalid(format!(
                    "categorical feature {} has {levels} levels; only binary categoricals may change",
                    s.feature_name(j)
                )))
            }
            FeatureKind::Categorical { levels } => {
                let values: Vec<f64> = (0..levels).map(|l| l as f64).filter(|&v| v != row[j]).collect();
                ActionGrid {
                    feature: j,
                    costs: vec![1.0; values.len()],
                    values,
                    categorical: true,
                    scale: 1.0,
                }
            }
            FeatureKind::Numeric => {
                let obs = observed(data, j);
                let levels = (1..=n_steps).map(|k| k as f64 / (n_steps + 1) as f64);
                let mut values: Vec<f64> = quantiles_at(&obs, levels).into_iter().filter(|&v| v != row[j]).collect();
                values.sort_by(|a, b| {
                    relative_change(row[j], *a)
                        .total_cmp(&relative_change(row[j], *b))
                        .then(a.total_cmp(b))
                });
                let (_, std) = column_moments(data, j);
                ActionGrid {
                    feature: j,
                    costs: values.iter().map(|&v| relative_change(row[j], v)).collect(),
                    values,
                    categorical: false,
                    scale: if std > 0.0 { std } else { 1.0 },
                }
            }
        };
        out.push(grid);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Change {
    pub feature: String,
    pub index: usize,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    /// Full row in original space.
    pub values: Vec<f64>,
    pub changes: Vec<Change>,
    pub score: f64,
    pub outcome: u8,
    pub n_changes: usize,
    pub max_relative_change: f64,
    /// Sum of changes in units of each feature's spread (1 per toggle).
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSet {
    pub reference_score: f64,
    pub reference_outcome: u8,
    pub target_outcome: u8,
    pub counterfactuals: Vec<Counterfactual>,
    /// Search nodes visited.
    pub nodes: usize,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterfactualConfig {
    /// Input indices that may change.
    pub mutable: Vec<usize>,
    pub max_changes: usize,
    /// Inner quantile steps per numeric feature.
    pub n_steps: usize,
    /// Outcome is `1` iff the score reaches this value.
    pub threshold: f64,
    /// Wanted outcome; `None` flips the reference outcome.
    pub desired: Option<u8>,
    /// Search stops after visiting this many nodes.
    pub max_nodes: usize,
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        Self {
            mutable: Vec::new(),
            max_changes: 5,
            n_steps: 19,
            threshold: 0.5,
            desired: None,
            max_nodes: 2_000_000,
        }
    }
}

fn outcome(score: f64, threshold: f64) -> u8 {
    u8::from(score >= threshold)
}

/// Builds and re-scores a counterfactual from `(grid index, value)` assignments.
fn emit<S: Scorer + ?Sized>(
    s: &S,
    row: &[f64],
    grids: &[ActionGrid],
    assign: &[(usize, f64)],
    threshold: f64,
) -> Counterfactual {
    let mut values = row.to_vec();
    let mut changes = Vec::with_capacity(assign.len());
    let (mut max_rel, mut distance) = (0.0f64, 0.0);
    for &(g, v) in assign {
        let grid = &grids[g];
        let j = grid.feature;
        values[j] = v;
        let rel = if grid.categorical { 1.0 } else { relative_change(row[j], v) };
        max_rel = max_rel.max(rel);
        distance += grid.step(row[j], v);
        changes.push(Change {
            feature: s.feature_name(j),
            index: j,
            from: row[j],
            to: v,
        });
    }
    let score = s.score(&values);
    Counterfactual {
        values,
        n_changes: changes.len(),
        changes,
        score,
        outcome: outcome(score, threshold),
        max_relative_change: max_rel,
        distance,
    }
}

/// Non-dominated `(n_changes, max_relative_change)` pairs, first occurrence kept,
/// sorted by `n_changes`.
pub fn pareto_front(points: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for &(n, m) in points {
        if out.iter().any(|&(a, b)| a <= n && b <= m) {
            continue;
        }
        out.retain(|&(a, b)| !(n <= a && m <= b));
        out.push((n, m));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out
}

struct Search<'a, S: ?Sized> {
    s: &'a S,
    row: &'a [f64],
    grids: &'a [ActionGrid],
    cfg: &'a CounterfactualConfig,
    target: u8,
    /// Signed log-odds progress of each grid value toward the target, when the
    /// log-odds are additive.
    gains: Option<Vec<Vec<f64>>>,
    /// Log-odds progress still needed from the reference.
    needed: f64,
    front: Vec<Counterfactual>,
    current: Vec<f64>,
    assign: Vec<(usize, f64)>,
    nodes: usize,
    stopped: bool,
}

impl<S: Scorer + ?Sized> Search<'_, S> {
    fn dominated(&self, n: usize, m: f64) -> bool {
        self.front.iter().any(|c| c.n_changes <= n && c.max_relative_change <= m)
    }

    /// Largest progress reachable from grid position `from` with `k` more changes.
    fn best_rest(&self, from: usize, k: usize) -> f64 {
        let gains = self.gains.as_ref().expect("bound only with gains");
        let mut best: Vec<f64> = gains[from..]
            .iter()
            .map(|g| g.iter().copied().fold(0.0, f64::max))
            .collect();
        best.sort_by(|a, b| b.total_cmp(a));
        best.iter().take(k).sum()
    }

    fn dfs(&mut self, pos: usize, progress: f64, max_rel: f64) {
        let depth = self.assign.len();
        for q in pos..self.grids.len() {
            let j = self.grids[q].feature;
            for (vi, &v) in self.grids[q].values.iter().enumerate() {
                if self.stopped {
                    return;
                }
                let rel = max_rel.max(self.grids[q].costs[vi]);
                // values are ordered by cost, so later ones are dominated too
                if self.dominated(depth + 1, rel) {
                    break;
                }
                let mut next_progress = progress;
                if let Some(g) = &self.gains {
                    next_progress += g[q][vi];
                    let remaining = self.cfg.max_changes - depth - 1;
                    if next_progress + self.best_rest(q + 1, remaining) < self.needed - 1e-6 {
                        continue;
                    }
                }
                self.nodes += 1;
                if self.nodes >= self.cfg.max_nodes {
                    self.stopped = true;
                }
                self.current[j] = v;
                self.assign.push((q, v));
                let score = self.s.score(&self.current);
                if outcome(score, self.cfg.threshold) == self.target {
                    let cf = emit(self.s, self.row, self.grids, &self.assign, self.cfg.threshold);
                    if cf.outcome == self.target {
                        let (n, m) = (cf.n_changes, cf.max_relative_change);
                        self.front.retain(|c| !(n <= c.n_changes && m <= c.max_relative_change));
                        self.front.push(cf);
                    }
                } else if depth + 1 < self.cfg.max_changes {
                    self.dfs(q + 1, next_progress, rel);
                }
                self.assign.pop();
                self.current[j] = self.row[j];
            }
        }
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Pareto-optimal counterfactuals under (number of changes, largest relative change).
pub fn counterfactual_search<S: Scorer + ?Sized>(
    s: &S,
    row: &[f64],
    data: ArrayView2<f64>,
    cfg: &CounterfactualConfig,
) -> Result<CounterfactualSet> {
    if cfg.max_changes == 0 {
        return Err(Error::invalid("max_changes must be at least 1"));
    }
    let grids = action_grids(s, row, data, &cfg.mutable, cfg.n_steps)?;
    let reference_score = s.score(row);
    let reference_outcome = outcome(reference_score, cfg.threshold);
    let target = cfg.desired.unwrap_or(1 - reference_outcome);
    let mut out = CounterfactualSet {
        reference_score,
        reference_outcome,
        target_outcome: target,
        counterfactuals: Vec::new(),
        nodes: 0,
        diagnostics: Vec::new(),
    };
    if target > 1 {
        return Err(Error::invalid("desired outcome must be 0 or 1"));
    }
    if target == reference_outcome {
        out.diagnostics.push("reference row already has the desired outcome".into());
        return Ok(out);
    }

    // With additive log-odds, progress is the margin moved toward the target side.
    let sign = if target == 1 { 1.0 } else { -1.0 };
    let cut = match s.scale() {
        OutputScale::Probability if cfg.threshold > 0.0 && cfg.threshold < 1.0 => Some(logit(cfg.threshold)),
        OutputScale::LogOdds => Some(cfg.threshold),
        _ => None,
    };
    let reference_margin = match s.scale() {
        OutputScale::LogOdds => Some(reference_score),
        OutputScale::Probability if reference_score > 0.0 && reference_score < 1.0 => Some(logit(reference_score)),
        _ => None,
    };
    let gains = match (cut, reference_margin) {
        (Some(_), Some(_)) => grids
            .iter()
            .map(|g| {
                g.values
                    .iter()
                    .map(|&v| s.margin_delta(row, g.feature, v).map(|d| sign * d))
                    .collect::<Option<Vec<f64>>>()
            })
            .collect::<Option<Vec<_>>>(),
        _ => None,
    };
    let needed = match (cut, reference_margin) {
        (Some(c), Some(m)) => sign * (c - m),
        _ => 0.0,
    };

    let mut search = Search {
        s,
        row,
        grids: &grids,
        cfg,
        target,
        gains,
        needed,
        front: Vec::new(),
        current: row.to_vec(),
        assign: Vec::new(),
        nodes: 0,
        stopped: false,
    };
    search.dfs(0, 0.0, 0.0);
    let mut front = search.front;
    front.sort_by(|a, b| {
        a.n_changes
            .cmp(&b.n_changes)
            .then(a.max_relative_change.total_cmp(&b.max_relative_change))
    });
    out.nodes = search.nodes;
    if search.stopped {
        out.diagnostics.push(format!(
            "search stopped after {} nodes; the front may be incomplete",
            cfg.max_nodes
        ));
    }
    if front.is_empty() {
        out.diagnostics.push(format!(
            "no counterfactual within the action grid and {} changes",
            cfg.max_changes
        ));
    }
    out.counterfactuals = front;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiverseConfig {
    pub mutable: Vec<usize>,
    /// Number of counterfactuals wanted.
    pub k: usize,
    pub proximity_weight: f64,
    pub diversity_weight: f64,
    pub n_restarts: usize,
    /// Improving moves per restart.
    pub max_steps: usize,
    pub n_steps: usize,
    pub threshold: f64,
    pub desired: Option<u8>,
    pub seed: u64,
}

impl Default for DiverseConfig {
    fn default() -> Self {
        Self {
            mutable: Vec::new(),
            k: 4,
            proximity_weight: 0.5,
            diversity_weight: 1.0,
            n_restarts: 5,
            max_steps: 100,
            n_steps: 19,
            threshold: 0.5,
            desired: None,
            seed: 0,
        }
    }
}

/// Candidate state: an option per grid (0 = reference value, `o` = `values[o − 1]`).
type Choice = Vec<usize>;

struct Diverse<'a, S: ?Sized> {
    s: &'a S,
    row: &'a [f64],
    grids: &'a [ActionGrid],
    cfg: &'a DiverseConfig,
    target: u8,
}

impl<S: Scorer + ?Sized> Diverse<'_, S> {
    fn value(&self, g: usize, o: usize) -> f64 {
        if o == 0 {
            self.row[self.grids[g].feature]
        } else {
            self.grids[g].values[o - 1]
        }
    }

    fn validity(&self, c: &Choice) -> f64 {
        let mut x = self.row.to_vec();
        for (g, &o) in c.iter().enumerate() {
            x[self.grids[g].feature] = self.value(g, o);
        }
        let score = self.s.score(&x);
        if outcome(score, self.cfg.threshold) == self.target {
            1.0
        } else {
            -1.0 - (score - self.cfg.threshold).abs()
        }
    }

    fn distance(&self, a: &Choice, b: &Choice) -> f64 {
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(g, (&oa, &ob))| self.grids[g].step(self.value(g, oa), self.value(g, ob)))
            .sum()
    }

    /// `mean validity − λ₁·mean distance to the reference + λ₂·mean pairwise distance`.
    fn objective(&self, cands: &[Choice], valid: &[f64]) -> f64 {
        let k = cands.len() as f64;
        let origin = vec![0; self.grids.len()];
        let v = valid.iter().sum::<f64>() / k;
        let prox = cands.iter().map(|c| self.distance(c, &origin)).sum::<f64>() / k;
        let mut div = 0.0;
        if cands.len() > 1 {
            for i in 0..cands.len() {
                for j in i + 1..cands.len() {
                    div += self.distance(&cands[i], &cands[j]);
                }
            }
            div /= k * (k - 1.0) / 2.0;
        }
        v - self.cfg.proximity_weight * prox + self.cfg.diversity_weight * div
    }

    fn restart(&self, idx: usize) -> (f64, Vec<Choice>) {
        let mut r = rng::substream(self.cfg.seed, "diverse-restart", idx as u64);
        let mut cands: Vec<Choice> = (0..self.cfg.k)
            .map(|_| {
                self.grids
                    .iter()
                    .map(|g| {
                        if g.values.is_empty() || r.random::<f64>() < 0.5 {
                            0
                        } else {
                            r.random_range(1..=g.values.len())
                        }
                    })
                    .collect()
            })
            .collect();
        let mut valid: Vec<f64> = cands.iter().map(|c| self.validity(c)).collect();
        let mut best = self.objective(&cands, &valid);
        for _ in 0..self.cfg.max_steps {
            let mut step: Option<(f64, usize, usize, usize, f64)> = None;
            for i in 0..cands.len() {
                for g in 0..self.grids.len() {
                    let keep = cands[i][g];
                    for o in 0..=self.grids[g].values.len() {
                        if o == keep {
                            continue;
                        }
                        cands[i][g] = o;
                        let vi = self.validity(&cands[i]);
                        let old = std::mem::replace(&mut valid[i], vi);
                        let obj = self.objective(&cands, &valid);
                        valid[i] = old;
                        if obj > best + 1e-12 && step.is_none_or(|s| obj > s.0) {
                            step = Some((obj, i, g, o, vi));
                        }
                    }
                    cands[i][g] = keep;
                }
            }
            match step {
                Some((obj, i, g, o, vi)) => {
                    cands[i][g] = o;
                    valid[i] = vi;
                    best = obj;
                }
                None => break,
            }
        }
        (best, cands)
    }
}

/// Up to `k` counterfactuals from the best of several seeded local-search restarts.
pub fn diverse_counterfactuals<S: Scorer + ?Sized>(
    s: &S,
    row: &[f64],
    data: ArrayView2<f64>,
    cfg: &DiverseConfig,
) -> Result<CounterfactualSet> {
    if cfg.k == 0 || cfg.n_restarts == 0 {
        return Err(Error::invalid("diverse counterfactuals need k ≥ 1 and at least one restart"));
    }
    let grids = action_grids(s, row, data, &cfg.mutable, cfg.n_steps)?;
    let reference_score = s.score(row);
    let reference_outcome = outcome(reference_score, cfg.threshold);
    let target = cfg.desired.unwrap_or(1 - reference_outcome);
    let mut out = CounterfactualSet {
        reference_score,
        reference_outcome,
        target_outcome: target,
        counterfactuals: Vec::new(),
        nodes: 0,
        diagnostics: Vec::new(),
    };
    if target > 1 {
        return Err(Error::invalid("desired outcome must be 0 or 1"));
    }
    if target == reference_outcome {
        out.diagnostics.push("reference row already has the desired outcome".into());
        return Ok(out);
    }
    let d = Diverse {
        s,
        row,
        grids: &grids,
        cfg,
        target,
    };
    let mut best: Option<(f64, Vec<Choice>)> = None;
    for idx in 0..cfg.n_restarts {
        let (obj, cands) = d.restart(idx);
        if best.as_ref().is_none_or(|b| obj > b.0) {
            best = Some((obj, cands));
        }
    }
    let (_, cands) = best.expect("at least one restart");
    let mut kept: Vec<&Choice> = Vec::new();
    for c in &cands {
        let assign: Vec<(usize, f64)> = c
            .iter()
            .enumerate()
            .filter(|(_, &o)| o > 0)
            .map(|(g, &o)| (g, d.value(g, o)))
            .collect();
        let cf = emit(s, row, &grids, &assign, cfg.threshold);
        if cf.outcome == target {
            kept.push(c);
            out.counterfactuals.push(cf);
        }
    }
    if out.counterfactuals.len() < cfg.k {
        out.diagnostics.push(format!(
            "found {} of {} valid counterfactuals",
            out.counterfactuals.len(),
            cfg.k
        ));
    }
    let dupes = (0..kept.len())
        .filter(|&i| kept[..i].contains(&kept[i]))
        .count();
    if dupes > 0 {
        out.diagnostics.push(format!("{dupes} duplicate counterfactuals"));
    }
    Ok(out)
}
