use std::path::{Path, PathBuf};

use credit_core::tabular::{apply_preprocess, fit_preprocess, ColumnData, DatasetProfile};
use credit_core::Error;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn profile(name: &str) -> DatasetProfile {
    DatasetProfile::from_file(&root().join("profiles").join(format!("{name}.profile"))).unwrap()
}

#[test]
fn german_loads_with_expected_shape() {
    let t = profile("german").load(&root().join("data")).unwrap();
    assert_eq!(t.n_rows(), 1000);
    // 19 features plus the sensitive column make the 20 attributes
    assert_eq!(t.features().len(), 19);
    assert_eq!(t.labels().iter().filter(|&&y| y == 1).count(), 300);
    assert_eq!(t.sensitive().unwrap().iter().filter(|&&z| z == 1).count(), 310);
    let numeric = t.features().iter().filter(|c| matches!(c.data, ColumnData::Numeric(_))).count();
    assert_eq!(numeric, 7);
}

#[test]
fn german_design_width() {
    let t = profile("german").load(&root().join("data")).unwrap();
    // level counts of the 12 categorical features, read off the file
    let levels = [4, 5, 10, 5, 5, 3, 4, 3, 3, 4, 2, 2];
    let expected = 7 + levels.iter().map(|l| l + 1).sum::<usize>();
    let plan = fit_preprocess(&t, false).unwrap();
    assert_eq!(apply_preprocess(&plan, &t).unwrap().x.ncols(), expected);
    let aware = fit_preprocess(&t, true).unwrap();
    assert_eq!(apply_preprocess(&aware, &t).unwrap().x.ncols(), expected + 1);
}

#[test]
fn every_shipped_profile_parses() {
    for name in ["german", "german-uci", "taiwan", "homecredit", "synthetic"] {
        let p = profile(name);
        assert_eq!(p.name, name);
        if p.generator.is_none() {
            assert!(p.fetch.as_deref().unwrap().contains("fetch_data.sh"));
        }
    }
}

#[test]
fn missing_file_names_the_fetch_script() {
    let dir = tempfile::tempdir().unwrap();
    match profile("taiwan").load(dir.path()) {
        Err(Error::MissingData { hint, .. }) => assert!(hint.contains("scripts/fetch_data.sh taiwan"), "{hint}"),
        other => panic!("expected missing data, got {other:?}"),
    }
}

#[test]
fn synthetic_profile_generates() {
    let t = profile("synthetic").load(Path::new("/nonexistent")).unwrap();
    assert_eq!(t.n_rows(), 20_000);
    assert!(t.sensitive().is_some());
}
