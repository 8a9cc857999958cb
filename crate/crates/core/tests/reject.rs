use credit_core::learners::{predict_proba_batch, LogisticModel, Predictor};
use credit_core::reject::*;
use ndarray::Array2;
use rand::Rng;

fn synthetic_scenario(n: usize, seed: u64) -> RejectScenario {
    let t = synthetic_homecredit(n, seed).unwrap();
    let cfg = ScenarioConfig {
        policy_features: SYNTHETIC_POLICY_FEATURES.iter().map(|s| s.to_string()).collect(),
        seed,
        ..Default::default()
    };
    simulate_rejection(&t, &cfg).unwrap()
}

/// One-feature scenario whose acceptance model returns `probs` exactly.
fn fixed_probs(probs: &[f64], accepted: &[bool]) -> (RejectScenario, AcceptanceModel) {
    let x = Array2::from_shape_fn((probs.len(), 1), |(i, _)| (probs[i] / (1.0 - probs[i])).ln());
    let y: Vec<u8> = (0..probs.len()).map(|i| (i % 2) as u8).collect();
    let s = scenario_from_parts(x.view(), &y, accepted, x.view(), &y).unwrap();
    (s, AcceptanceModel { model: LogisticModel::new(vec![1.0], 0.0) })
}

#[test]
fn synthetic_policy_shape() {
    let s = synthetic_scenario(6000, 1);
    let st = s.stats;
    assert!(st.reject_share > 0.3 && st.reject_share < 0.95, "{st:?}");
    assert!(st.reject_default_rate > st.accept_default_rate, "{st:?}");
    assert_eq!(s.n_accepted() + s.n_rejected(), st.pool_size);
    let again = synthetic_scenario(6000, 1);
    assert_eq!(s.record(), again.record());
    let other = synthetic_scenario(6000, 2);
    assert_ne!(s.record().accepted, other.record().accepted);
}

#[test]
fn policy_and_study_features_are_disjoint() {
    let s = synthetic_scenario(3000, 3);
    assert!(s.policy_features.iter().all(|p| !s.study_features.contains(p)));
    let names: Vec<String> = (0..10).map(|i| format!("f{i}")).collect();
    let (a, b) = hash_partition(&names);
    assert_eq!(a.len() + b.len(), 10);
    assert_eq!(hash_partition(&names), (a, b));
}

#[test]
fn threshold_outside_score_range_is_an_error() {
    let t = synthetic_homecredit(2000, 0).unwrap();
    for threshold in [1.01, 0.0] {
        let cfg = ScenarioConfig {
            threshold,
            ..Default::default()
        };
        let err = simulate_rejection(&t, &cfg).unwrap_err();
        assert!(err.to_string().contains("threshold"), "{err}");
    }
}

#[test]
fn acceptance_model_is_clipped_and_calibrated() {
    let s = synthetic_scenario(6000, 4);
    let acc = acceptance_model(&s).unwrap();
    let p = predict_proba_batch(&acc, s.x_pool.view()).unwrap();
    assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    assert!((mean - s.stats.accept_share).abs() < 0.05);
    let extreme = AcceptanceModel { model: LogisticModel::new(vec![100.0], 0.0) };
    assert_eq!(extreme.predict_proba_row(&[10.0]), 1.0 - ACCEPT_CLIP);
    assert_eq!(extreme.predict_proba_row(&[-10.0]), ACCEPT_CLIP);
}

#[test]
fn acceptance_model_is_flat_for_uninformative_features() {
    let mut r = credit_core::rng::from_seed(5);
    let n = 4000;
    let x = Array2::from_shape_fn((n, 2), |_| r.random::<f64>());
    let accepted: Vec<bool> = (0..n).map(|_| r.random::<f64>() < 0.3).collect();
    let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let s = scenario_from_parts(x.view(), &y, &accepted, x.view(), &y).unwrap();
    let p = predict_proba_batch(&acceptance_model(&s).unwrap(), x.view()).unwrap();
    assert!(p.iter().all(|&v| (v - s.stats.accept_share).abs() < 0.05));
}

#[test]
fn upward_and_downward_arithmetic() {
    let (s, acc) = fixed_probs(&[0.8, 0.2], &[true, true]);
    let up = augment_upward(&s, &acc).unwrap();
    // raw weights 1.25 and 5, mean 3.125
    assert!((up.w[0] - 1.25 / 3.125).abs() < 1e-12 && (up.w[1] - 5.0 / 3.125).abs() < 1e-12);
    let down = augment_downward(&s, &acc).unwrap();
    // raw weights 0.2 and 0.8, mean 0.5
    assert!((down.w[0] - 0.4).abs() < 1e-12 && (down.w[1] - 1.6).abs() < 1e-12);

    let (s, acc) = fixed_probs(&[0.3; 5], &[true, false, true, true, false]);
    for set in [augment_upward(&s, &acc).unwrap(), augment_downward(&s, &acc).unwrap()] {
        assert_eq!(set.len(), 3);
        assert!(set.w.iter().all(|&w| (w - 1.0).abs() < 1e-12));
    }
}

#[test]
fn upward_and_downward_share_weight_ordering() {
    let s = synthetic_scenario(4000, 6);
    let acc = acceptance_model(&s).unwrap();
    let up = augment_upward(&s, &acc).unwrap();
    let down = augment_downward(&s, &acc).unwrap();
    for set in [&up, &down] {
        let mean = set.w.iter().sum::<f64>() / set.len() as f64;
        assert!((mean - 1.0).abs() < 1e-9);
        assert!(set.w.iter().all(|w| w.is_finite() && *w > 0.0));
    }
    for i in 0..up.len() {
        for j in (i + 1..up.len()).step_by(97) {
            let a = up.w[i].total_cmp(&up.w[j]);
            let b = down.w[i].total_cmp(&down.w[j]);
            assert_eq!(a, b);
        }
    }
}

#[test]
fn upward_weights_move_accepted_means_toward_pool() {
    let s = synthetic_scenario(8000, 7);
    let acc = acceptance_model(&s).unwrap();
    let up = augment_upward(&s, &acc).unwrap();
    let xa = s.x_accepted();
    let wsum: f64 = up.w.iter().sum();
    let mut closer = 0;
    for j in 0..xa.ncols() {
        let pool = s.x_pool.column(j).mean().unwrap();
        let plain = xa.column(j).mean().unwrap();
        let weighted = xa.column(j).iter().zip(&up.w).map(|(x, w)| x * w).sum::<f64>() / wsum;
        if (weighted - pool).abs() <= (plain - pool).abs() + 1e-12 {
            closer += 1;
        }
    }
    assert!(closer * 4 >= xa.ncols() * 3, "{closer} of {}", xa.ncols());
}

#[test]
fn soft_cutoff_bookkeeping() {
    let s = synthetic_scenario(4000, 8);
    let acc = acceptance_model(&s).unwrap();
    let one = augment_soft_cutoff(&s, &acc, 1).unwrap();
    let ratio = s.accepted.len() as f64 / s.n_accepted() as f64;
    assert!(one.w.iter().all(|&w| (w - ratio).abs() < 1e-12));
    let ten = augment_soft_cutoff(&s, &acc, 10).unwrap();
    let total: f64 = ten.w.iter().sum();
    assert!((total - s.accepted.len() as f64).abs() < 1e-6);

    // a band made only of accepted rows keeps factor 1
    let (s, acc) = fixed_probs(&[0.1, 0.2, 0.3, 0.7, 0.8, 0.9], &[false, true, false, true, true, true]);
    let set = augment_soft_cutoff(&s, &acc, 2).unwrap();
    assert_eq!(set.w, vec![3.0, 1.0, 1.0, 1.0]);
}

#[test]
fn soft_cutoff_merges_bands_without_accepts() {
    let (s, acc) = fixed_probs(&[0.1, 0.2, 0.7, 0.8], &[false, false, true, true]);
    let set = augment_soft_cutoff(&s, &acc, 2).unwrap();
    assert_eq!(set.w, vec![2.0, 2.0]);
    assert_eq!(set.diagnostics.len(), 1);
}

#[test]
fn fuzzy_duplicates_rejects() {
    let (s, acc) = fixed_probs(&[0.5, 0.9, 0.3], &[false, true, false]);
    let set = augment_fuzzy(&s, &acc).unwrap();
    assert_eq!(set.len(), 5);
    assert_eq!(set.w[0], 1.0);
    assert!((set.w[1] - 0.5).abs() < 1e-12 && (set.w[3] - 0.5).abs() < 1e-12);
    assert_eq!((set.y[1], set.y[3]), (0, 1));
    assert!((set.w[2] + set.w[4] - 1.0).abs() < 1e-12);
    assert_eq!(set.provenance[1], Provenance::RejectDuplicateGood);
}

#[test]
fn extrapolation_variants() {
    let s = synthetic_scenario(4000, 9);
    let base_set = AugmentedTrainingSet::accepted_only(&s);
    let w: Vec<f64> = {
        let n1 = base_set.y.iter().filter(|&&y| y == 1).count() as f64;
        let n0 = base_set.len() as f64 - n1;
        base_set.y.iter().map(|&y| if y == 1 { 0.5 / n1 } else { 0.5 / n0 }).collect()
    };
    let base = credit_core::learners::fit_logistic(
        base_set.x.view(),
        &base_set.y,
        &w,
        &Default::default(),
    )
    .unwrap();
    let all = extrapolate(&s, &base, ExtrapolationVariant::All, 0.1).unwrap();
    assert_eq!(all.len(), s.accepted.len());
    let scores = predict_proba_batch(&base, s.x_rejected().view()).unwrap();
    let expect: Vec<u8> = scores.iter().map(|&p| u8::from(p >= 0.5)).collect();
    assert_eq!(&all.y[s.n_accepted()..], &expect[..]);

    let bad = extrapolate(&s, &base, ExtrapolationVariant::Bad, 0.1).unwrap();
    assert!(bad.bad_share() > base_set.bad_share());
    assert!(bad.y[s.n_accepted()..].iter().all(|&y| y == 1));

    let conf = extrapolate(&s, &base, ExtrapolationVariant::Confident, 0.1).unwrap();
    let added = conf.len() - s.n_accepted();
    assert!(added <= 2 * ((0.1 * s.n_rejected() as f64).round() as usize));

    let mut r = credit_core::rng::from_seed(1);
    let x = Array2::from_shape_fn((20, 2), |_| r.random::<f64>());
    let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
    let none = scenario_from_parts(x.view(), &y, &[true; 20], x.view(), &y).unwrap();
    for v in [ExtrapolationVariant::All, ExtrapolationVariant::Bad, ExtrapolationVariant::Confident] {
        assert_eq!(extrapolate(&none, &base, v, 0.1).unwrap(), AugmentedTrainingSet::accepted_only(&none));
    }
}

#[test]
fn strategies_never_read_hidden_labels() {
    let s = synthetic_scenario(3000, 10);
    let poisoned = s.with_poisoned_hidden_labels();
    let cfg = RiConfig {
        params: [("n_trees".to_string(), 20.0)].into_iter().collect(),
        ..Default::default()
    };
    let base = credit_core::learners::fit_family(
        cfg.family,
        &cfg.params,
        s.x_accepted().view(),
        &s.accepted_labels,
        &vec![1.0; s.n_accepted()],
        0,
    )
    .unwrap();
    for k in Strategy::ALL {
        let a = build_training_set(&s, k, &cfg, &base).unwrap();
        let b = build_training_set(&poisoned, k, &cfg, &base).unwrap();
        assert_eq!(a, b, "{k}");
    }
    assert_eq!(run_ri(&s, &Strategy::ALL, &cfg).unwrap(), run_ri(&poisoned, &Strategy::ALL, &cfg).unwrap());
}

#[test]
fn baseline_kickout_is_zero() {
    let s = synthetic_scenario(4000, 11);
    let cfg = RiConfig {
        params: [("n_trees".to_string(), 30.0)].into_iter().collect(),
        ..Default::default()
    };
    let rows = run_ri(&s, &[Strategy::Baseline, Strategy::Upward, Strategy::LabelSpreading], &cfg).unwrap();
    assert_eq!(rows[0].kickout, Some(0.0));
    for row in &rows {
        assert!(row.auc > 0.5 && row.auc <= 1.0, "{row:?}");
        assert!((0.0..=1.0).contains(&row.approval_rate));
    }
}

#[test]
fn label_spreading_keeps_accepted_labels_in_clean_neighbourhoods() {
    let mut r = credit_core::rng::from_seed(12);
    let n = 80;
    let x = Array2::from_shape_fn((n, 2), |(i, _)| if i % 2 == 0 { 0.0 } else { 10.0 } + r.random::<f64>());
    let observed: Vec<Option<u8>> = (0..n).map(|i| if i % 5 == 0 { None } else { Some((i % 2) as u8) }).collect();
    for alpha in [0.2, 0.5, 0.9] {
        let cfg = SpreadingConfig {
            alpha,
            ..Default::default()
        };
        let res = spread_labels(x.view(), &observed, &cfg).unwrap();
        for i in 0..n {
            assert_eq!(res.labels[i], (i % 2) as u8);
        }
    }
}
