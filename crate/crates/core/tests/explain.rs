use credit_core::explain::*;
use credit_core::learners::{
    fit_boost, fit_logistic, sigmoid, BoostConfig, LogisticConfig, LogisticModel, Model, Predictor,
};
use credit_core::reject::synthetic_homecredit;
use credit_core::rng;
use credit_core::tabular::{
    apply_preprocess, fit_preprocess, ColumnData, ColumnPlan, ColumnSpec, FeatureColumn, PreprocessPlan, Table,
};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn random_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::from_seed(seed);
    Array2::from_shape_fn((n, d), |_| r.random_range(-2.0..2.0))
}

fn exact() -> ShapConfig {
    ShapConfig::default()
}

fn permutation(n: usize, seed: u64) -> ShapConfig {
    ShapConfig {
        mode: ShapMode::Permutation,
        n_permutations: n,
        seed,
    }
}

fn synthetic_fit(n: usize) -> (Table, PreprocessPlan, Array2<f64>, Vec<u8>) {
    let t = synthetic_homecredit(n, 5).unwrap();
    let plan = fit_preprocess(&t, false).unwrap();
    let x = apply_preprocess(&plan, &t).unwrap().x;
    let y = t.labels().to_vec();
    (t, plan, x, y)
}

fn numeric_table(cols: &[Vec<f64>], labels: Vec<u8>) -> Table {
    let features = cols
        .iter()
        .enumerate()
        .map(|(j, c)| FeatureColumn {
            spec: ColumnSpec::numeric(format!("f{}", j + 1)),
            data: ColumnData::Numeric(c.iter().map(|&v| Some(v)).collect()),
        })
        .collect();
    Table::new(features, labels, None).unwrap()
}

// --- Shapley values ---

#[test]
fn linear_game_has_closed_form_contributions() {
    let beta = [1.5, -0.7, 0.0, 2.0, 0.3];
    let s = FnScorer::new(5, |x: &[f64]| 0.4 + x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>());
    let bg = random_matrix(40, 5, 1);
    let row = [0.3, -1.2, 5.0, 0.8, -0.1];
    let a = shap_values(&s, &row, bg.view(), &exact()).unwrap();
    for k in 0..5 {
        let mean = bg.column(k).mean().unwrap();
        assert!((a.contributions[k] - beta[k] * (row[k] - mean)).abs() < 1e-10, "{k}");
    }
    assert_eq!(a.contributions[2], 0.0);
    let total = a.base_value + a.contributions.iter().sum::<f64>();
    assert!((total - a.prediction).abs() < 1e-10);
}

#[test]
fn symmetric_and_dummy_features() {
    // x0 and x1 enter symmetrically; x4 is ignored
    let f = |x: &[f64]| (x[0] + x[1]).sin() * x[2] + x[3] * x[3] + (x[0] * x[1]).tanh();
    let s = FnScorer::new(5, f);
    let mut bg = random_matrix(30, 5, 2);
    for i in 0..30 {
        bg[[i, 1]] = bg[[i, 0]];
    }
    let row = [0.7, 0.7, -1.1, 0.4, 9.0];
    let a = shap_values(&s, &row, bg.view(), &exact()).unwrap();
    assert_eq!(a.contributions[0], a.contributions[1]);
    assert_eq!(a.contributions[4], 0.0);
    let total = a.base_value + a.contributions.iter().sum::<f64>();
    assert!((total - a.prediction).abs() < 1e-10);
}

#[test]
fn permutation_estimate_tracks_exact_values() {
    let f = |x: &[f64]| sigmoid(0.8 * x[0] - 0.5 * x[1] * x[2] + 0.3 * x[3] + x[4].abs() - 0.2 * x[5] * x[0]);
    let s = FnScorer::new(6, f);
    let bg = random_matrix(50, 6, 3);
    for seed in 0..3 {
        let row: Vec<f64> = random_matrix(1, 6, 100 + seed).row(0).to_vec();
        let e = shap_values(&s, &row, bg.view(), &exact()).unwrap();
        let p = shap_values(&s, &row, bg.view(), &permutation(200, seed)).unwrap();
        let diff = e
            .contributions
            .iter()
            .zip(&p.contributions)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 0.02, "max difference {diff}");
        assert!((p.base_value + p.contributions.iter().sum::<f64>() - p.prediction).abs() < 1e-10);
        assert!((e.base_value - p.base_value).abs() < 1e-12);
    }
}

#[test]
fn exact_mode_refuses_wide_inputs() {
    let s = FnScorer::new(13, |x: &[f64]| x[0]);
    let bg = random_matrix(3, 13, 4);
    let err = shap_values(&s, &[0.0; 13], bg.view(), &exact()).unwrap_err();
    assert!(err.to_string().contains("permutation"));
    assert!(shap_values(&s, &[0.0; 13], bg.view(), &permutation(5, 0)).is_ok());
}

#[test]
fn permutation_mode_is_seeded() {
    let s = FnScorer::new(4, |x: &[f64]| x[0] * x[1] + x[2].exp() - x[3]);
    let bg = random_matrix(20, 4, 5);
    let row = [1.0, 2.0, 0.5, -1.0];
    let a = shap_values(&s, &row, bg.view(), &permutation(30, 9)).unwrap();
    let b = shap_values(&s, &row, bg.view(), &permutation(30, 9)).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exact_values_are_efficient(
        w in proptest::collection::vec(-2.0f64..2.0, 4),
        inter in -1.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let s = FnScorer::new(4, |x: &[f64]| {
            sigmoid(x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + inter * x[0] * x[3])
        });
        let bg = random_matrix(15, 4, seed);
        let row: Vec<f64> = random_matrix(1, 4, seed + 1).row(0).to_vec();
        let a = shap_values(&s, &row, bg.view(), &exact()).unwrap();
        let total = a.base_value + a.contributions.iter().sum::<f64>();
        prop_assert!((total - a.prediction).abs() < 1e-10);
        let p = shap_values(&s, &row, bg.view(), &permutation(3, seed)).unwrap();
        let total = p.base_value + p.contributions.iter().sum::<f64>();
        prop_assert!((total - p.prediction).abs() < 1e-10);
    }
}

// --- global importance ---

#[test]
fn coefficient_ranking_keeps_signs() {
    let mut r = rng::from_seed(6);
    let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..50).map(|_| r.random::<f64>()).collect()).collect();
    let t = numeric_table(&cols, (0..50).map(|i| (i % 2) as u8).collect());
    let plan = fit_preprocess(&t, false).unwrap();
    let model = Model::Logistic(LogisticModel::new(vec![2.0, -1.0, 0.0], 0.0));
    let bg = plan.to_original(&t).unwrap();
    let imp = global_importance(&plan, &model, ImportanceKind::LrCoefficients, bg.view(), &Default::default()).unwrap();
    let names: Vec<&str> = imp.iter().map(|f| f.feature.as_str()).collect();
    assert_eq!(names, ["f1", "f2", "f3"]);
    let signs: Vec<f64> = imp.iter().map(|f| f.signed.unwrap().signum() * f64::from(u8::from(f.signed.unwrap() != 0.0))).collect();
    assert_eq!(signs, [1.0, -1.0, 0.0]);
    assert!(global_importance(&plan, &model, ImportanceKind::SplitCounts, bg.view(), &Default::default()).is_err());

    // the third feature is ignored, so its Shapley importance vanishes
    let shap = global_importance(&plan, &model, ImportanceKind::MeanAbsShap, bg.view(), &Default::default()).unwrap();
    let f3 = shap.iter().find(|f| f.feature == "f3").unwrap();
    assert!(f3.importance.abs() < 1e-3);
}

#[test]
fn unsplit_feature_has_zero_split_count() {
    let mut r = rng::from_seed(7);
    let n = 300;
    let x0: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    let labels: Vec<u8> = x0.iter().map(|&v| u8::from(v + 0.3 * r.random::<f64>() > 0.6)).collect();
    let t = numeric_table(&[x0, vec![1.0; n]], labels);
    let plan = fit_preprocess(&t, false).unwrap();
    let x = apply_preprocess(&plan, &t).unwrap().x;
    let m = fit_boost(x.view(), t.labels(), &vec![1.0; n], &BoostConfig { n_trees: 20, ..Default::default() }).unwrap();
    let model = Model::Boost(m);
    let bg = plan.to_original(&t).unwrap();
    let imp = global_importance(&plan, &model, ImportanceKind::SplitCounts, bg.view(), &Default::default()).unwrap();
    assert_eq!(imp[0].feature, "f1");
    assert!(imp[0].importance > 0.0);
    assert_eq!(imp[1].importance, 0.0);
    assert!(global_importance(&plan, &model, ImportanceKind::LrCoefficients, bg.view(), &Default::default()).is_err());
}

#[test]
fn categorical_coefficients_aggregate_by_absolute_sum() {
    let (t, plan, x, y) = synthetic_fit(2000);
    let m = fit_logistic(x.view(), &y, &vec![1.0; y.len()], &LogisticConfig::default()).unwrap();
    let sources = plan.column_sources();
    let edu = plan.input_names().iter().position(|n| n == "education").unwrap();
    let expected: f64 = m.coef.iter().zip(&sources).filter(|(_, &s)| s == edu).map(|(b, _)| b.abs()).sum();
    let bg = plan.to_original(&t).unwrap();
    let imp = global_importance(&plan, &Model::Logistic(m), ImportanceKind::LrCoefficients, bg.view(), &Default::default()).unwrap();
    let e = imp.iter().find(|f| f.feature == "education").unwrap();
    assert!((e.importance - expected).abs() < 1e-12);
    assert!(e.signed.is_none());
    assert!(imp.windows(2).all(|w| w[0].importance >= w[1].importance));
}

// --- PD and ICE ---

fn output_of(plan: &PreprocessPlan, input: usize) -> usize {
    plan.column_sources().iter().position(|&s| s == input).unwrap()
}

#[test]
fn logistic_log_odds_pd_is_affine_with_known_slope() {
    let (t, plan, x, y) = synthetic_fit(3000);
    let m = fit_logistic(x.view(), &y, &vec![1.0; y.len()], &LogisticConfig::default()).unwrap();
    let data = plan.to_original(&t).unwrap();
    let s = Pipeline::new(&plan, &m).unwrap().with_scale(OutputScale::LogOdds);
    for name in ["age_years", "ext_source_2", "amt_income"] {
        let k = plan.input_names().iter().position(|n| n == name).unwrap();
        let ColumnPlan::Numeric { std, .. } = &plan.columns[k] else { panic!() };
        let slope = m.coef[output_of(&plan, k)] / std;
        let pd = partial_dependence(&s, data.view(), k, 20).unwrap();
        assert!(pd.grid.windows(2).all(|w| w[0] < w[1]));
        for g in 1..pd.grid.len() {
            let d = (pd.pd[g] - pd.pd[g - 1]) / (pd.grid[g] - pd.grid[g - 1]);
            assert!((d - slope).abs() < 1e-9 * slope.abs().max(1.0), "{name}: {d} vs {slope}");
        }
    }
}

#[test]
fn pd_matches_naive_recomputation() {
    let (t, plan, x, y) = synthetic_fit(800);
    let m = fit_boost(x.view(), &y, &vec![1.0; y.len()], &BoostConfig { n_trees: 30, ..Default::default() }).unwrap();
    let data = plan.to_original(&t).unwrap();
    let s = Pipeline::new(&plan, &m).unwrap();
    let k = plan.input_names().iter().position(|n| n == "ext_source_1").unwrap();
    let pd = partial_dependence(&s, data.view(), k, 20).unwrap();
    let mut enc = vec![0.0; plan.n_outputs()];
    for (g, &v) in pd.grid.iter().enumerate() {
        let mut total = 0.0;
        for row in data.rows() {
            let mut r = row.to_vec();
            r[k] = v;
            plan.encode_original_row(&r, &mut enc);
            total += m.predict_proba_row(&enc);
        }
        assert!((total / data.nrows() as f64 - pd.pd[g]).abs() < 1e-12);
    }

    // categorical grid follows the vocabulary
    let e = plan.input_names().iter().position(|n| n == "education").unwrap();
    let pd = partial_dependence(&s, data.view(), e, 20).unwrap();
    assert_eq!(pd.grid.len(), pd.grid_labels.as_ref().unwrap().len());
    assert!(ice(&s, data.view(), e, &IceConfig::default()).is_err());
}

#[test]
fn ignored_and_constant_features() {
    let s = FnScorer::new(3, |x: &[f64]| x[0].sin() + x[2]);
    let mut data = random_matrix(60, 3, 8);
    let pd = partial_dependence(&s, data.view(), 1, 20).unwrap();
    let (lo, hi) = pd.pd.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi - lo < 1e-12);
    data.column_mut(2).fill(4.0);
    let pd = partial_dependence(&s, data.view(), 2, 20).unwrap();
    assert_eq!(pd.grid, vec![4.0]);
    assert_eq!(pd.diagnostics.len(), 1);
}

#[test]
fn ice_lines_center_and_average_to_pd() {
    let (t, plan, x, y) = synthetic_fit(1500);
    let m = fit_logistic(x.view(), &y, &vec![1.0; y.len()], &LogisticConfig::default()).unwrap();
    let data = plan.to_original(&t).unwrap();
    let s = Pipeline::new(&plan, &m).unwrap();
    let names = plan.input_names();
    let k = names.iter().position(|n| n == "cnt_children").unwrap();
    assert!(m.coef[output_of(&plan, k)] > 0.0);
    let sub = data.slice(ndarray::s![..300, ..]).to_owned();
    let cfg = IceConfig {
        max_rows: None,
        centered: false,
        color_by: Some(0),
        ..Default::default()
    };
    let raw = ice(&s, sub.view(), k, &cfg).unwrap();
    let pd = partial_dependence(&s, sub.view(), k, cfg.grid_size).unwrap();
    assert_eq!(raw.grid, pd.grid);
    for g in 0..pd.grid.len() {
        let mean = raw.ice.iter().map(|l| l[g]).sum::<f64>() / raw.ice.len() as f64;
        assert!((mean - pd.pd[g]).abs() < 1e-12);
        assert!((raw.pd[g] - pd.pd[g]).abs() < 1e-12);
    }
    assert!(raw.ice.iter().all(|l| l.windows(2).all(|w| w[1] >= w[0])));
    let (name, colors) = raw.color_by.as_ref().unwrap();
    assert_eq!(name, &names[0]);
    assert_eq!(colors.len(), raw.ice.len());

    let centered = ice(&s, data.view(), k, &IceConfig { max_rows: Some(50), ..Default::default() }).unwrap();
    assert_eq!(centered.ice.len(), 50);
    assert!(centered.ice.iter().all(|l| l[0] == 0.0));
    let again = ice(&s, data.view(), k, &IceConfig { max_rows: Some(50), ..Default::default() }).unwrap();
    assert_eq!(centered.rows, again.rows);
}

// --- LIME ---

#[test]
fn lime_recovers_linear_direction() {
    let beta = [1.0, -2.0, 0.5, 0.0, 3.0];
    let s = FnScorer::new(5, |x: &[f64]| x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>());
    let mut data = random_matrix(200, 5, 9);
    for (j, mut c) in data.columns_mut().into_iter().enumerate() {
        c.mapv_inplace(|v| v * (j + 1) as f64);
    }
    let row = data.row(3).to_vec();
    let cfg = LimeConfig { n_samples: 2000, ..Default::default() };
    let e = lime_local(&s, &row, data.view(), &cfg).unwrap();
    let per_unit: Vec<f64> = e.coefficients.iter().zip(&e.scales).map(|(c, s)| c / s).collect();
    let dot: f64 = per_unit.iter().zip(&beta).map(|(a, b)| a * b).sum();
    let na: f64 = per_unit.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    assert!(dot / (na * nb) > 0.99);
    assert!(e.r2 > 0.99);
    assert_eq!(e, lime_local(&s, &row, data.view(), &cfg).unwrap());
}

#[test]
fn wide_kernel_converges_to_global_fit() {
    let s = FnScorer::new(3, |x: &[f64]| sigmoid(x[0] - x[1] * x[2]));
    let data = random_matrix(100, 3, 10);
    let row = [0.1, 0.2, -0.3];
    let fit = |w: f64| {
        let cfg = LimeConfig { n_samples: 600, kernel_width: Some(w), seed: 3, ..Default::default() };
        lime_local(&s, &row, data.view(), &cfg).unwrap().coefficients
    };
    let (a, b) = (fit(1e6), fit(1e7));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9);
    }
    let narrow = fit(0.3);
    assert!(narrow.iter().zip(&a).any(|(x, y)| (x - y).abs() > 1e-3));
}

#[test]
fn lime_rejects_degenerate_inputs() {
    let s = FnScorer::new(2, |x: &[f64]| x[0]);
    let mut data = random_matrix(50, 2, 11);
    assert!(lime_local(&s, &[0.0, 0.0], data.view(), &LimeConfig { n_samples: 19, ..Default::default() }).is_err());
    data.column_mut(1).fill(1.0);
    let err = lime_local(&s, &[0.0, 1.0], data.view(), &LimeConfig::default()).unwrap_err();
    assert!(err.to_string().contains("zero variance"));
}

#[test]
fn lime_resamples_categoricals_from_marginals() {
    let (t, plan, x, y) = synthetic_fit(1000);
    let m = fit_logistic(x.view(), &y, &vec![1.0; y.len()], &LogisticConfig::default()).unwrap();
    let data = plan.to_original(&t).unwrap();
    let s = Pipeline::new(&plan, &m).unwrap();
    let row = data.row(0).to_vec();
    let e = lime_local(&s, &row, data.view(), &LimeConfig::default()).unwrap();
    assert_eq!(e.coefficients.len(), plan.n_inputs());
    assert!(e.r2 > 0.5, "{}", e.r2);
}

// --- counterfactuals ---

fn flip_ok<S: Scorer>(s: &S, row: &[f64], set: &CounterfactualSet, mutable: &[usize], threshold: f64) {
    for cf in &set.counterfactuals {
        assert_eq!(u8::from(s.score(&cf.values) >= threshold), set.target_outcome);
        for (j, (a, b)) in cf.values.iter().zip(row).enumerate() {
            if a.to_bits() != b.to_bits() {
                assert!(mutable.contains(&j));
            }
        }
    }
}

#[test]
fn one_dimensional_logistic_crosses_at_root() {
    let (b0, b1) = (-5.0, 1.0);
    let s = FnScorer::new(1, move |x: &[f64]| sigmoid(b0 + b1 * x[0]));
    let data = Array2::from_shape_fn((101, 1), |(i, _)| i as f64 / 10.0);
    let cfg = CounterfactualConfig { mutable: vec![0], ..Default::default() };
    let set = counterfactual_search(&s, &[1.0], data.view(), &cfg).unwrap();
    assert_eq!(set.reference_outcome, 0);
    assert_eq!(set.counterfactuals.len(), 1);
    let cf = &set.counterfactuals[0];
    let grids = action_grids(&s, &[1.0], data.view(), &[0], 19).unwrap();
    let root = -b0 / b1;
    let below = grids[0].values.iter().copied().filter(|&v| v < cf.changes[0].to).fold(f64::MIN, f64::max);
    assert!(below < root && root <= cf.changes[0].to, "{below} {root} {}", cf.changes[0].to);
    assert_eq!(cf.n_changes, 1);
    assert!((cf.max_relative_change - (cf.changes[0].to - 1.0) / (1.0 + 1e-9)).abs() < 1e-12);
    flip_ok(&s, &[1.0], &set, &[0], 0.5);

    let done = counterfactual_search(&s, &[1.0], data.view(), &CounterfactualConfig { desired: Some(0), ..cfg }).unwrap();
    assert!(done.counterfactuals.is_empty());
    assert_eq!(done.diagnostics.len(), 1);
}

fn brute_force(
    s: &impl Scorer,
    row: &[f64],
    grids: &[ActionGrid],
    max_changes: usize,
    target: u8,
) -> Vec<(usize, f64)> {
    let mut points = Vec::new();
    let sizes: Vec<usize> = grids.iter().map(|g| g.values.len() + 1).collect();
    let total: usize = sizes.iter().product();
    for code in 0..total {
        let mut c = code;
        let mut x = row.to_vec();
        let (mut n, mut m) = (0, 0.0f64);
        for (g, &sz) in grids.iter().zip(&sizes) {
            let o = c % sz;
            c /= sz;
            if o > 0 {
                x[g.feature] = g.values[o - 1];
                n += 1;
                m = m.max(g.costs[o - 1]);
            }
        }
        if n > 0 && n <= max_changes && u8::from(s.score(&x) >= 0.5) == target {
            points.push((n, m));
        }
    }
    pareto_front(&points)
}

#[test]
fn search_front_equals_exhaustive_front() {
    for seed in 0..25u64 {
        let mut r = rng::from_seed(seed);
        let w: Vec<f64> = (0..4).map(|_| r.random_range(-2.0..2.0)).collect();
        let s = FnScorer::new(3, move |x: &[f64]| {
            sigmoid(w[0] * x[0] + w[1] * x[1] * x[1] - w[2] * x[2] + w[3] * x[0] * x[2])
        });
        let data = random_matrix(80, 3, seed + 50).mapv(|v| v + 3.0);
        let row: Vec<f64> = data.row(0).to_vec();
        let max_changes = 1 + (seed as usize % 3);
        let cfg = CounterfactualConfig {
            mutable: vec![0, 1, 2],
            max_changes,
            n_steps: 5,
            ..Default::default()
        };
        let set = counterfactual_search(&s, &row, data.view(), &cfg).unwrap();
        let grids = action_grids(&s, &row, data.view(), &[0, 1, 2], 5).unwrap();
        let oracle = brute_force(&s, &row, &grids, max_changes, set.target_outcome);
        let got: Vec<(usize, f64)> = set.counterfactuals.iter().map(|c| (c.n_changes, c.max_relative_change)).collect();
        assert_eq!(got, oracle, "seed {seed}");
        assert_eq!(set.diagnostics.is_empty(), !oracle.is_empty());
        flip_ok(&s, &row, &set, &[0, 1, 2], 0.5);
    }
}

/// Forwards everything except the margin hook, so the search runs unbounded.
struct NoBound<'a, S>(&'a S);

impl<S: Scorer> Scorer for NoBound<'_, S> {
    fn n_inputs(&self) -> usize {
        self.0.n_inputs()
    }
    fn score(&self, row: &[f64]) -> f64 {
        self.0.score(row)
    }
    fn feature_kind(&self, j: usize) -> FeatureKind {
        self.0.feature_kind(j)
    }
    fn is_immutable(&self, j: usize) -> bool {
        self.0.is_immutable(j)
    }
}

#[test]
fn margin_bound_prunes_without_losing_points() {
    let t = synthetic_homecredit(1500, 12).unwrap();
    let plan = fit_preprocess(&t, true).unwrap();
    let x = apply_preprocess(&plan, &t).unwrap().x;
    let m = fit_logistic(x.view(), t.labels(), &vec![1.0; t.n_rows()], &LogisticConfig::default()).unwrap();
    let data = plan.to_original(&t).unwrap();
    let s = Pipeline::new(&plan, &m).unwrap();
    let names = plan.input_names();
    let mutable: Vec<usize> = ["ext_source_2", "years_employed", "amt_income", "amt_credit", "amt_annuity", "own_car"]
        .iter()
        .map(|n| names.iter().position(|m| m == n).unwrap())
        .collect();
    let cfg = CounterfactualConfig {
        mutable: mutable.clone(),
        threshold: 0.1,
        n_steps: 9,
        max_changes: 4,
        ..Default::default()
    };
    let mut checked = 0;
    for i in 0..40 {
        let row = data.row(i).to_vec();
        let a = counterfactual_search(&s, &row, data.view(), &cfg).unwrap();
        let b = counterfactual_search(&NoBound(&s), &row, data.view(), &cfg).unwrap();
        let key = |c: &Counterfactual| (c.n_changes, c.max_relative_change);
        assert_eq!(
            a.counterfactuals.iter().map(key).collect::<Vec<_>>(),
            b.counterfactuals.iter().map(key).collect::<Vec<_>>()
        );
        assert!(a.nodes <= b.nodes);
        flip_ok(&s, &row, &a, &mutable, 0.1);
        checked += usize::from(!a.counterfactuals.is_empty());
    }
    assert!(checked > 5);

    // the sensitive attribute and multi-level categoricals cannot change
    let row = data.row(0).to_vec();
    let sens = plan.sensitive_input().unwrap();
    let edu = names.iter().position(|n| n == "education").unwrap();
    for bad in [sens, edu] {
        let cfg = CounterfactualConfig { mutable: vec![bad], ..Default::default() };
        assert!(counterfactual_search(&s, &row, data.view(), &cfg).is_err());
    }
}

#[test]
fn unreachable_target_reports_empty_front() {
    let s = FnScorer::new(2, |x: &[f64]| sigmoid(x[0] - 100.0));
    let data = random_matrix(30, 2, 13);
    let cfg = CounterfactualConfig { mutable: vec![0, 1], ..Default::default() };
    let set = counterfactual_search(&s, &[0.0, 0.0], data.view(), &cfg).unwrap();
    assert!(set.counterfactuals.is_empty());
    assert!(set.diagnostics[0].contains("no counterfactual"));
}

fn min_pairwise(set: &CounterfactualSet) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..set.counterfactuals.len() {
        for j in i + 1..set.counterfactuals.len() {
            let d: f64 = set.counterfactuals[i]
                .values
                .iter()
                .zip(&set.counterfactuals[j].values)
                .map(|(a, b)| (a - b).abs())
                .sum();
            best = best.min(d);
        }
    }
    best
}

#[test]
fn diverse_counterfactuals_trade_proximity_for_diversity() {
    let s = FnScorer::new(3, |x: &[f64]| sigmoid(x[0] + x[1] + x[2] - 1.0));
    let data = random_matrix(200, 3, 14);
    let row = [-1.0, -1.0, -1.0];
    let base = DiverseConfig {
        mutable: vec![0, 1, 2],
        k: 3,
        seed: 4,
        ..Default::default()
    };

    let one = diverse_counterfactuals(&s, &row, data.view(), &DiverseConfig { k: 1, ..base.clone() }).unwrap();
    assert_eq!(one.counterfactuals.len(), 1);
    flip_ok(&s, &row, &one, &[0, 1, 2], 0.5);

    // one mutable feature and no diversity reward: every restart finds the same point
    let same = diverse_counterfactuals(
        &s,
        &[-1.0, 0.5, 0.5],
        data.view(),
        &DiverseConfig {
            mutable: vec![0],
            diversity_weight: 0.0,
            ..base.clone()
        },
    )
    .unwrap();
    assert_eq!(same.counterfactuals.len(), 3);
    assert!(same.diagnostics.iter().any(|d| d.contains("duplicate")));
    assert_eq!(min_pairwise(&same), 0.0);

    let mut last = -1.0;
    for w in [0.0, 0.1, 0.5, 2.0, 10.0] {
        let set = diverse_counterfactuals(&s, &row, data.view(), &DiverseConfig { diversity_weight: w, ..base.clone() }).unwrap();
        flip_ok(&s, &row, &set, &[0, 1, 2], 0.5);
        let d = if set.counterfactuals.len() < 2 { 0.0 } else { min_pairwise(&set) };
        assert!(d >= last, "weight {w}: {d} < {last}");
        last = d;
    }
    assert!(last > 0.0);
}

#[test]
fn explanations_see_the_sensitive_column_as_immutable() {
    let t = synthetic_homecredit(400, 15).unwrap();
    let plan = fit_preprocess(&t, true).unwrap();
    let x = apply_preprocess(&plan, &t).unwrap().x;
    let m = fit_logistic(x.view(), t.labels(), &vec![1.0; t.n_rows()], &LogisticConfig::default()).unwrap();
    let s = Pipeline::new(&plan, &m).unwrap();
    let sens = plan.sensitive_input().unwrap();
    assert!(s.is_immutable(sens));
    assert_eq!(s.feature_kind(sens), FeatureKind::Categorical { levels: 2 });
    assert!(Pipeline::new(&fit_preprocess(&t, false).unwrap(), &m).is_err());
}
