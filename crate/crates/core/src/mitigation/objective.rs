/// Model-selection score with a fairness goal: `perf` when `fair <= f_star`, otherwise
/// `perf − m·(fair − f_star)`.
pub fn fairness_objective(perf: f64, fair: f64, f_star: f64, m: f64) -> f64 {
    if fair <= f_star {
        perf
    } else {
        perf - m * (fair - f_star)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn examples() {
        assert_eq!(fairness_objective(0.75, 0.03, 0.05, 100.0), 0.75);
        assert!((fairness_objective(0.75, 0.15, 0.05, 100.0) + 9.25).abs() < 1e-12);
    }

    #[test]
    fn goal_meeting_models_rank_first() {
        let mut r = crate::rng::from_seed(11);
        for _ in 0..10_000 {
            let (pa, pb): (f64, f64) = (r.random(), r.random());
            let met = fairness_objective(pa, 0.05 * r.random::<f64>(), 0.05, 100.0);
            let miss = fairness_objective(pb, 0.05 + 0.0101 + r.random::<f64>(), 0.05, 100.0);
            assert!(met > miss);
            let (qa, qb) = (0.5 + pa / 2.0, 0.5 + pb / 2.0);
            let met = fairness_objective(qa, 0.05, 0.05, 100.0);
            let miss = fairness_objective(qb, 0.05 + 0.007 + 1e-9, 0.05, 100.0);
            assert!(met > miss);
        }
        // the bound cannot be extended to a 0.007 miss over the whole unit interval
        assert!(fairness_objective(0.0, 0.0, 0.05, 100.0) < fairness_objective(1.0, 0.057, 0.05, 100.0));
    }

    #[test]
    fn monotone_in_perf_and_fair() {
        let mut r = crate::rng::from_seed(12);
        for _ in 0..1000 {
            let (p, f): (f64, f64) = (r.random(), r.random::<f64>() * 0.3);
            let dp: f64 = r.random::<f64>() * 0.1;
            let df: f64 = r.random::<f64>() * 0.1;
            assert!(fairness_objective(p + dp, f, 0.05, 100.0) >= fairness_objective(p, f, 0.05, 100.0));
            let f0 = f.max(0.05);
            assert!(fairness_objective(p, f0 + df, 0.05, 100.0) <= fairness_objective(p, f0, 0.05, 100.0));
        }
    }
}
