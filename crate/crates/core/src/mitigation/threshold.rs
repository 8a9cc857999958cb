//! Group-specific decision thresholds chosen on per-group ROC curves.
//!
//! ROC points here are `(FPR, TPR)` of the default prediction `Ŷ = 1`: FPR is the
//! share of good payers denied, TPR the share of bad payers denied. Equal
//! opportunity equalizes FPR (equivalently the favorable rate among `Y = 0`);
//! equalized odds equalizes both coordinates.

use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Deterministic per-group thresholds with favorable rates among good payers equal
    /// up to `1/n`.
    EqualOpportunity,
    /// Randomized point in the intersection of the groups' ROC convex hulls.
    EqualizedOdds,
}

/// Probability of denial (`Ŷ = 1`) as a step function of the score: `deny[0]` below
/// `t_low`, `deny[1]` on `[t_low, t_high)`, `deny[2]` at or above `t_high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupPolicy {
    pub t_low: f64,
    pub t_high: f64,
    pub deny: [f64; 3],
}

impl GroupPolicy {
    /// Plain threshold: deny iff score ≥ `t`.
    pub fn threshold(t: f64) -> Self {
        Self {
            t_low: t,
            t_high: t,
            deny: [0.0, 1.0, 1.0],
        }
    }

    pub fn deny_probability(&self, score: f64) -> f64 {
        if score >= self.t_high {
            self.deny[2]
        } else if score >= self.t_low {
            self.deny[1]
        } else {
            self.deny[0]
        }
    }

    /// Whether the policy is a single deterministic threshold.
    pub fn is_deterministic(&self) -> bool {
        self.deny.iter().all(|&p| p == 0.0 || p == 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub mode: ThresholdMode,
    /// Policies for groups 0 and 1.
    pub groups: [GroupPolicy; 2],
    /// Expected `(FPR, TPR)` of each group on the fitting data.
    pub rates: [[f64; 2]; 2],
    /// Expected number of misclassified fitting rows.
    pub fit_loss: f64,
    pub diagnostics: Vec<String>,
}

/// ROC of one group over thresholds `+∞, u_k, …, u_1` (distinct scores descending).
struct GroupRoc {
    thresholds: Vec<f64>,
    /// Denied good payers at each threshold.
    fp: Vec<usize>,
    /// Denied bad payers at each threshold.
    tp: Vec<usize>,
    n0: usize,
    n1: usize,
}

impl GroupRoc {
    fn new(scores: &[f64], labels: &[u8]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let mut thresholds = vec![f64::INFINITY];
        let (mut fp, mut tp) = (vec![0], vec![0]);
        let (mut f, mut t) = (0, 0);
        let mut i = 0;
        while i < order.len() {
            let s = scores[order[i]];
            while i < order.len() && scores[order[i]] == s {
                if labels[order[i]] == 1 {
                    t += 1;
                } else {
                    f += 1;
                }
                i += 1;
            }
            thresholds.push(s);
            fp.push(f);
            tp.push(t);
        }
        let n1 = labels.iter().filter(|&&y| y == 1).count();
        Self {
            thresholds,
            fp,
            tp,
            n0: labels.len() - n1,
            n1,
        }
    }

    fn errors(&self, k: usize) -> usize {
        self.fp[k] + (self.n1 - self.tp[k])
    }

    fn point(&self, k: usize) -> (f64, f64) {
        (self.fp[k] as f64 / self.n0 as f64, self.tp[k] as f64 / self.n1 as f64)
    }
}

fn split_groups(scores: &[f64], labels: &[u8], group: &[u8]) -> Result<[GroupRoc; 2]> {
    if scores.len() != labels.len() || scores.len() != group.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            actual: labels.len().min(group.len()),
        });
    }
    let mut out = Vec::with_capacity(2);
    for g in 0..2u8 {
        let idx: Vec<usize> = (0..scores.len()).filter(|&i| group[i] == g).collect();
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let y: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        let roc = GroupRoc::new(&s, &y);
        if roc.n0 == 0 || roc.n1 == 0 {
            return Err(Error::EmptyCell(format!("group {g} needs both classes")));
        }
        out.push(roc);
    }
    if let Some(i) = group.iter().position(|&g| g > 1) {
        return Err(Error::invalid(format!("group value {} at row {i} is not binary", group[i])));
    }
    let b = out.pop().unwrap();
    let a = out.pop().unwrap();
    Ok([a, b])
}

pub fn fit_threshold_optimizer(
    scores: &[f64],
    labels: &[u8],
    group: &[u8],
    mode: ThresholdMode,
) -> Result<ThresholdPolicy> {
    let rocs = split_groups(scores, labels, group)?;
    let mut diagnostics = Vec::new();
    for (g, r) in rocs.iter().enumerate() {
        if r.thresholds.len() <= 2 {
            diagnostics.push(format!("group {g} has tied scores; degenerate ROC"));
        }
    }
    match mode {
        ThresholdMode::EqualOpportunity => Ok(equal_opportunity(&rocs, scores.len(), diagnostics)),
        ThresholdMode::EqualizedOdds => Ok(equalized_odds(&rocs, diagnostics)),
    }
}

fn equal_opportunity(rocs: &[GroupRoc; 2], n: usize, diagnostics: Vec<String>) -> ThresholdPolicy {
    let [a, b] = rocs;
    let tol = 1.0 / n as f64;
    let rate = |r: &GroupRoc, k: usize| r.fp[k] as f64 / r.n0 as f64;
    let mut best: Option<(usize, f64, usize, usize)> = None;
    // both FPR sequences are non-decreasing in the threshold index
    let mut lo = 0;
    for i in 0..a.thresholds.len() {
        let ra = rate(a, i);
        while lo < b.thresholds.len() && rate(b, lo) < ra - tol - EPS {
            lo += 1;
        }
        let mut j = lo;
        while j < b.thresholds.len() && rate(b, j) <= ra + tol + EPS {
            let gap = (ra - rate(b, j)).abs();
            if gap <= tol + EPS {
                let loss = a.errors(i) + b.errors(j);
                let better = match best {
                    None => true,
                    Some((l, g, _, _)) => loss < l || (loss == l && gap < g - EPS),
                };
                if better {
                    best = Some((loss, gap, i, j));
                }
            }
            j += 1;
        }
    }
    let (loss, _, i, j) = best.expect("accept-all thresholds always match");
    ThresholdPolicy {
        mode: ThresholdMode::EqualOpportunity,
        groups: [
            GroupPolicy::threshold(a.thresholds[i]),
            GroupPolicy::threshold(b.thresholds[j]),
        ],
        rates: [
            [a.point(i).0, a.point(i).1],
            [b.point(j).0, b.point(j).1],
        ],
        fit_loss: loss as f64,
        diagnostics,
    }
}

type Pt = (f64, f64);

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull (counter-clockwise) of ROC points, each tagged with its threshold index.
fn hull(roc: &GroupRoc) -> Vec<(Pt, usize)> {
    let mut pts: Vec<(Pt, usize)> = (0..roc.thresholds.len()).map(|k| (roc.point(k), k)).collect();
    pts.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(Pt, usize)> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2].0, lower[lower.len() - 1].0, p.0) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<(Pt, usize)> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2].0, upper[upper.len() - 1].0, p.0) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn on_segment(p: Pt, a: Pt, b: Pt) -> bool {
    cross(a, b, p).abs() <= 1e-9
        && p.0 >= a.0.min(b.0) - 1e-9
        && p.0 <= a.0.max(b.0) + 1e-9
        && p.1 >= a.1.min(b.1) - 1e-9
        && p.1 <= a.1.max(b.1) + 1e-9
}

fn inside(p: Pt, h: &[(Pt, usize)]) -> bool {
    match h.len() {
        0 => false,
        1 => (p.0 - h[0].0 .0).abs() < 1e-9 && (p.1 - h[0].0 .1).abs() < 1e-9,
        2 => on_segment(p, h[0].0, h[1].0),
        n => (0..n).all(|k| cross(h[k].0, h[(k + 1) % n].0, p) >= -1e-9),
    }
}

fn edges(h: &[(Pt, usize)]) -> Vec<(usize, usize)> {
    match h.len() {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        n => (0..n).map(|k| (k, (k + 1) % n)).collect(),
    }
}

fn segment_intersection(a: Pt, b: Pt, c: Pt, d: Pt) -> Option<Pt> {
    let r = (b.0 - a.0, b.1 - a.1);
    let s = (d.0 - c.0, d.1 - c.1);
    let den = r.0 * s.1 - r.1 * s.0;
    if den.abs() < 1e-15 {
        return None;
    }
    let t = ((c.0 - a.0) * s.1 - (c.1 - a.1) * s.0) / den;
    let u = ((c.0 - a.0) * r.1 - (c.1 - a.1) * r.0) / den;
    ((-1e-12..=1.0 + 1e-12).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u))
        .then(|| (a.0 + t * r.0, a.1 + t * r.1))
}

/// Mixture realizing `p` inside a group's hull: denial probabilities as a step function.
fn realize(p: Pt, h: &[(Pt, usize)], roc: &GroupRoc) -> GroupPolicy {
    let c = (0.5, 0.5);
    let dir = (p.0 - c.0, p.1 - c.1);
    if (p.0 - p.1).abs() < 1e-12 {
        // on the diagonal: deny everyone with probability p.0
        return GroupPolicy {
            t_low: f64::INFINITY,
            t_high: f64::INFINITY,
            deny: [p.0; 3],
        };
    }
    // farthest exit of the ray c + s·dir (s ≥ 1) through the hull boundary
    let mut best: Option<(f64, usize, usize, f64)> = None;
    for (i, j) in edges(h) {
        let (a, b) = (h[i].0, h[j].0);
        let e = (b.0 - a.0, b.1 - a.1);
        let den = dir.0 * e.1 - dir.1 * e.0;
        if den.abs() < 1e-15 {
            continue;
        }
        let s = ((a.0 - c.0) * e.1 - (a.1 - c.1) * e.0) / den;
        let u = ((a.0 - c.0) * dir.1 - (a.1 - c.1) * dir.0) / den;
        if s >= 1.0 - 1e-9 && (-1e-12..=1.0 + 1e-12).contains(&u) && best.is_none_or(|b| s > b.0) {
            best = Some((s, h[i].1, h[j].1, u.clamp(0.0, 1.0)));
        }
    }
    let (s, ka, kb, u) = best.unwrap_or((1.0, h[0].1, h[0].1, 0.0));
    // Q = (1−u)·ROC(ka) + u·ROC(kb); p = (1 − 1/s)·c + (1/s)·Q
    let (ta, tb) = (roc.thresholds[ka], roc.thresholds[kb]);
    let (t_low, t_high, q_low) = if ta <= tb { (ta, tb, 1.0 - u) } else { (tb, ta, u) };
    let gamma = 1.0 / s;
    let alpha = 0.5 * (1.0 - gamma);
    GroupPolicy {
        t_low,
        t_high,
        deny: [alpha, alpha + gamma * q_low, alpha + gamma],
    }
}

fn equalized_odds(rocs: &[GroupRoc; 2], diagnostics: Vec<String>) -> ThresholdPolicy {
    let hulls = [hull(&rocs[0]), hull(&rocs[1])];
    let mut cands: Vec<Pt> = Vec::new();
    for (g, h) in hulls.iter().enumerate() {
        cands.extend(h.iter().map(|v| v.0).filter(|&p| inside(p, &hulls[1 - g])));
    }
    for (i, j) in edges(&hulls[0]) {
        for (k, l) in edges(&hulls[1]) {
            if let Some(p) =
                segment_intersection(hulls[0][i].0, hulls[0][j].0, hulls[1][k].0, hulls[1][l].0)
            {
                cands.push(p);
            }
        }
    }
    // (0,0) and (1,1) belong to both hulls, so the candidate list is never empty
    let n0 = (rocs[0].n0 + rocs[1].n0) as f64;
    let n1 = (rocs[0].n1 + rocs[1].n1) as f64;
    let loss = |p: Pt| n0 * p.0 + n1 * (1.0 - p.1);
    let mut best = cands[0];
    for &p in &cands[1..] {
        if loss(p) < loss(best) - 1e-12 {
            best = p;
        }
    }
    let groups = [realize(best, &hulls[0], &rocs[0]), realize(best, &hulls[1], &rocs[1])];
    ThresholdPolicy {
        mode: ThresholdMode::EqualizedOdds,
        groups,
        rates: [[best.0, best.1]; 2],
        fit_loss: loss(best),
        diagnostics,
    }
}

/// Applies a fitted policy; randomized decisions draw from a stream seeded by `seed`.
pub fn apply_threshold_policy(
    policy: &ThresholdPolicy,
    scores: &[f64],
    group: &[u8],
    seed: u64,
) -> Result<Vec<u8>> {
    if scores.len() != group.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            actual: group.len(),
        });
    }
    let mut r = rng::stream(seed, "threshold-policy");
    scores
        .iter()
        .zip(group)
        .enumerate()
        .map(|(i, (&s, &g))| {
            let pol = policy
                .groups
                .get(g as usize)
                .ok_or_else(|| Error::invalid(format!("unseen group value {g} at row {i}")))?;
            let u: f64 = rand::Rng::random(&mut r);
            Ok(u8::from(u < pol.deny_probability(s)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn instance(seed: u64, n: usize) -> (Vec<f64>, Vec<u8>, Vec<u8>) {
        let mut r = rng::from_seed(seed);
        let z: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y: Vec<u8> = (0..n).map(|i| u8::from(r.random::<f64>() < 0.3 + 0.2 * f64::from(z[i]))).collect();
        let s: Vec<f64> = (0..n)
            .map(|i| {
                let v = 0.3 * f64::from(y[i]) + 0.15 * f64::from(z[i]) + 0.5 * r.random::<f64>();
                (v * 20.0).round() / 20.0
            })
            .collect();
        (s, y, z)
    }

    fn expected_rates(p: &GroupPolicy, s: &[f64], y: &[u8]) -> (f64, f64) {
        let (mut fp, mut tp, mut n0, mut n1) = (0.0, 0.0, 0.0, 0.0);
        for (&s, &y) in s.iter().zip(y) {
            let d = p.deny_probability(s);
            if y == 1 {
                tp += d;
                n1 += 1.0;
            } else {
                fp += d;
                n0 += 1.0;
            }
        }
        (fp / n0, tp / n1)
    }

    #[test]
    fn equal_opportunity_matches_pair_scan() {
        for seed in 0..30 {
            let (s, y, z) = instance(seed, 40);
            let pol = fit_threshold_optimizer(&s, &y, &z, ThresholdMode::EqualOpportunity).unwrap();
            let mut cands: Vec<f64> = s.clone();
            cands.push(f64::INFINITY);
            let mut best = usize::MAX;
            for &t0 in &cands {
                for &t1 in &cands {
                    let t = [t0, t1];
                    let (mut f, mut n0, mut err) = ([0usize; 2], [0usize; 2], 0usize);
                    for i in 0..40 {
                        let g = z[i] as usize;
                        let deny = s[i] >= t[g];
                        if y[i] == 0 {
                            n0[g] += 1;
                            f[g] += usize::from(deny);
                        }
                        err += usize::from(deny != (y[i] == 1));
                    }
                    let gap = (f[0] as f64 / n0[0] as f64 - f[1] as f64 / n0[1] as f64).abs();
                    if gap <= 1.0 / 40.0 + 1e-12 {
                        best = best.min(err);
                    }
                }
            }
            assert_eq!(pol.fit_loss as usize, best, "seed {seed}");
            let idx = |g: u8| -> (Vec<f64>, Vec<u8>) {
                let v: Vec<usize> = (0..40).filter(|&i| z[i] == g).collect();
                (v.iter().map(|&i| s[i]).collect(), v.iter().map(|&i| y[i]).collect())
            };
            let (s0, y0) = idx(0);
            let (s1, y1) = idx(1);
            let r0 = expected_rates(&pol.groups[0], &s0, &y0);
            let r1 = expected_rates(&pol.groups[1], &s1, &y1);
            assert!((r0.0 - r1.0).abs() <= 1.0 / 20.0);
        }
    }

    #[test]
    fn identical_groups_share_thresholds() {
        let s = [0.1, 0.4, 0.6, 0.9, 0.1, 0.4, 0.6, 0.9];
        let y = [0, 0, 1, 1, 0, 0, 1, 1];
        let z = [0, 0, 0, 0, 1, 1, 1, 1];
        for mode in [ThresholdMode::EqualOpportunity, ThresholdMode::EqualizedOdds] {
            let pol = fit_threshold_optimizer(&s, &y, &z, mode).unwrap();
            assert_eq!(pol.groups[0], pol.groups[1]);
            let p = apply_threshold_policy(&pol, &s, &z, 1).unwrap();
            let r = crate::metrics::fairness_from_predictions(&p, &y, &z, None).unwrap();
            assert_eq!(r.eod, Some(0.0));
        }
    }

    #[test]
    fn equalized_odds_realizes_target_in_expectation() {
        for seed in 0..20 {
            let (s, y, z) = instance(100 + seed, 120);
            let pol = fit_threshold_optimizer(&s, &y, &z, ThresholdMode::EqualizedOdds).unwrap();
            for g in 0..2u8 {
                let v: Vec<usize> = (0..s.len()).filter(|&i| z[i] == g).collect();
                let sg: Vec<f64> = v.iter().map(|&i| s[i]).collect();
                let yg: Vec<u8> = v.iter().map(|&i| y[i]).collect();
                let (f, t) = expected_rates(&pol.groups[g as usize], &sg, &yg);
                assert!((f - pol.rates[g as usize][0]).abs() < 1e-9, "seed {seed} group {g}");
                assert!((t - pol.rates[g as usize][1]).abs() < 1e-9, "seed {seed} group {g}");
            }
        }
    }

    #[test]
    fn equalized_odds_beats_dense_oracle() {
        // brute force over mixtures of two thresholds per group on a dense grid
        let (s, y, z) = instance(7, 30);
        let pol = fit_threshold_optimizer(&s, &y, &z, ThresholdMode::EqualizedOdds).unwrap();
        let rocs = split_groups(&s, &y, &z).unwrap();
        let n0 = (rocs[0].n0 + rocs[1].n0) as f64;
        let n1 = (rocs[0].n1 + rocs[1].n1) as f64;
        let mut pts: Vec<Vec<Pt>> = vec![Vec::new(), Vec::new()];
        for g in 0..2 {
            let r = &rocs[g];
            for a in 0..r.thresholds.len() {
                for b in 0..r.thresholds.len() {
                    for q in 0..=20 {
                        let q = q as f64 / 20.0;
                        let (pa, pb) = (r.point(a), r.point(b));
                        pts[g].push((q * pa.0 + (1.0 - q) * pb.0, q * pa.1 + (1.0 - q) * pb.1));
                    }
                }
            }
        }
        let mut best = f64::INFINITY;
        for p in &pts[0] {
            for q in &pts[1] {
                if (p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9 {
                    best = best.min(n0 * p.0 + n1 * (1.0 - p.1));
                }
            }
        }
        assert!(pol.fit_loss <= best + 1e-9);
    }

    #[test]
    fn mixing_trivial_policies() {
        let pol = ThresholdPolicy {
            mode: ThresholdMode::EqualizedOdds,
            groups: [GroupPolicy {
                t_low: f64::NEG_INFINITY,
                t_high: f64::INFINITY,
                deny: [0.0, 0.5, 1.0],
            }; 2],
            rates: [[0.5; 2]; 2],
            fit_loss: 0.0,
            diagnostics: vec![],
        };
        let n = 100_000;
        let s = vec![0.3; n];
        let z = vec![0; n];
        let p = apply_threshold_policy(&pol, &s, &z, 3).unwrap();
        let rate = p.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
        assert!((rate - 0.5).abs() < 0.01);
        assert_eq!(p, apply_threshold_policy(&pol, &s, &z, 3).unwrap());
        assert!(apply_threshold_policy(&pol, &[0.1], &[2], 3).is_err());
    }

    #[test]
    fn single_threshold_policy_is_global_threshold() {
        let pol = ThresholdPolicy {
            mode: ThresholdMode::EqualOpportunity,
            groups: [GroupPolicy::threshold(0.5); 2],
            rates: [[0.0; 2]; 2],
            fit_loss: 0.0,
            diagnostics: vec![],
        };
        let s = [0.1, 0.5, 0.7, 0.49];
        let p = apply_threshold_policy(&pol, &s, &[0, 1, 0, 1], 0).unwrap();
        assert_eq!(p, vec![0, 1, 1, 0]);
    }
}
