//! Synthetic "mini-homecredit" data for running the reject-inference suite without
//! the large download.
//!
//! Every applicant has a latent risk `u ~ N(0, 1)`. Columns:
//!
//! | column | distribution |
//! |---|---|
//! | `ext_source_1` | `σ(−0.8u + 0.8ε)`, missing with probability 0.3 |
//! | `ext_source_2` | `σ(−0.9u + 0.7ε)` |
//! | `ext_source_3` | `σ(−0.8u + 0.8ε)`, missing with probability 0.15 |
//! | `age_years` | `U(21, 68)` |
//! | `years_employed` | `min(Exp(mean 6), age − 18)` |
//! | `amt_income` | `exp(N(11.8, 0.5))` |
//! | `amt_credit` | `amt_income · U(1, 6)` |
//! | `amt_annuity` | `amt_credit / U(10, 30)` |
//! | `cnt_children` | `Poisson(0.4)` |
//! | `region_rating` | 1, 2, 3 with probabilities 0.1, 0.74, 0.16 |
//! | gender (sensitive attribute) | `F` (0.65) or `M` |
//! | `education` | `secondary` 0.71, `higher` 0.24, `incomplete_higher` 0.03, `lower_secondary` 0.02 |
//! | `own_car` | `Y` (0.34) or `N` |
//!
//! `ε` are independent standard normals. The default (label 1) is Bernoulli with
//! logit `−2.85 + 0.9u + 0.25(region − 2) − 0.015(age − 40) − 0.03·years_employed
//! + 0.25·[secondary or lower] + 0.15·[M] + 0.1·children`, giving a default rate near 8%.
//! Gender is the sensitive attribute (`F` → 1) and not a feature column.

use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal, Poisson};

use crate::learners::sigmoid;
use crate::rng;
use crate::tabular::{ColumnData, ColumnSpec, FeatureColumn, Table};
use crate::{Error, Result};

/// Features reserved for the simulated policy on the synthetic data.
pub const SYNTHETIC_POLICY_FEATURES: [&str; 4] = ["ext_source_3", "region_rating", "amt_income", "own_car"];

pub fn synthetic_homecredit(n: usize, seed: u64) -> Result<Table> {
    if n == 0 {
        return Err(Error::invalid("synthetic data needs at least one row"));
    }
    let mut r = rng::stream(seed, "synthetic-homecredit");
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    let income = Normal::new(11.8, 0.5).expect("valid normal");
    let employed = Exp::new(1.0 / 6.0).expect("valid rate");
    let children = Poisson::new(0.4).expect("valid mean");

    let mut num: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(n); 10];
    let mut cat: Vec<Vec<Option<String>>> = vec![Vec::with_capacity(n); 2];
    let mut labels = Vec::with_capacity(n);
    let mut sensitive = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = std.sample(&mut r);
        let e1 = sigmoid(-0.8 * u + 0.8 * std.sample(&mut r));
        let e2 = sigmoid(-0.9 * u + 0.7 * std.sample(&mut r));
        let e3 = sigmoid(-0.8 * u + 0.8 * std.sample(&mut r));
        let e1 = (r.random::<f64>() >= 0.3).then_some(e1);
        let e3 = (r.random::<f64>() >= 0.15).then_some(e3);
        let age = r.random_range(21.0..68.0);
        let years: f64 = employed.sample(&mut r);
        let years = years.min(age - 18.0);
        let inc: f64 = income.sample(&mut r);
        let inc = inc.exp();
        let credit = inc * r.random_range(1.0..6.0);
        let annuity = credit / r.random_range(10.0..30.0);
        let kids: f64 = children.sample(&mut r);
        let region = match r.random::<f64>() {
            v if v < 0.1 => 1.0,
            v if v < 0.84 => 2.0,
            _ => 3.0,
        };
        let female = r.random::<f64>() < 0.65;
        let edu = match r.random::<f64>() {
            v if v < 0.71 => "secondary",
            v if v < 0.95 => "higher",
            v if v < 0.98 => "incomplete_higher",
            _ => "lower_secondary",
        };
        let car = r.random::<f64>() < 0.34;
        let low_edu = matches!(edu, "secondary" | "lower_secondary");
        let logit = -2.85 + 0.9 * u + 0.25 * (region - 2.0) - 0.015 * (age - 40.0) - 0.03 * years
            + 0.25 * f64::from(u8::from(low_edu))
            + 0.15 * f64::from(u8::from(!female))
            + 0.1 * kids;
        labels.push(u8::from(r.random::<f64>() < sigmoid(logit)));
        sensitive.push(u8::from(female));
        for (col, v) in num.iter_mut().zip([
            e1,
            Some(e2),
            e3,
            Some(age),
            Some(years),
            Some(inc),
            Some(credit),
            Some(annuity),
            Some(kids),
            Some(region),
        ]) {
            col.push(v);
        }
        cat[0].push(Some(edu.to_string()));
        cat[1].push(Some(if car { "Y" } else { "N" }.to_string()));
    }
    let num_names = [
        "ext_source_1",
        "ext_source_2",
        "ext_source_3",
        "age_years",
        "years_employed",
        "amt_income",
        "amt_credit",
        "amt_annuity",
        "cnt_children",
        "region_rating",
    ];
    let mut features: Vec<FeatureColumn> = num_names
        .iter()
        .zip(num)
        .map(|(name, v)| FeatureColumn {
            spec: ColumnSpec::numeric(*name),
            data: ColumnData::Numeric(v),
        })
        .collect();
    for (name, v) in ["education", "own_car"].iter().zip(cat) {
        features.push(FeatureColumn {
            spec: ColumnSpec::categorical(*name),
            data: ColumnData::Categorical(v),
        });
    }
    Table::new(features, labels, Some(sensitive))
}
