//! Split and preprocessing cache.
//!
//! The cache lives at `<out>/cache/prep-<key>.json` next to a `.sha256` file holding
//! the checksum of the JSON body. The key hashes the profile, the data file contents
//! and the split settings, so any change to them produces a fresh entry.

use std::path::{Path, PathBuf};

use credit_core::rng;
use credit_core::tabular::{fit_preprocess, split, DatasetProfile, PreprocessPlan, SplitIndices, SplitSpec, Table};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::{CliError, Result};

/// Loaded table with its folds and per-fold preprocessing plans.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub profile: DatasetProfile,
    pub table: Table,
    pub folds: Vec<SplitIndices>,
    /// Plans fitted on each fold's training rows, without the sensitive column.
    pub unaware: Vec<PreprocessPlan>,
    /// Same with the sensitive column; `None` when the profile has none.
    pub aware: Option<Vec<PreprocessPlan>>,
    pub cache_path: PathBuf,
    pub cache_hit: bool,
}

impl Prepared {
    pub fn plan(&self, fold: usize, aware: bool) -> Result<&PreprocessPlan> {
        if aware {
            let plans = self.aware.as_ref().ok_or_else(|| {
                CliError::Config(format!("dataset {} has no sensitive column", self.profile.name))
            })?;
            Ok(&plans[fold])
        } else {
            Ok(&self.unaware[fold])
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheBody {
    key: String,
    dataset: String,
    n_rows: usize,
    split: SplitSpec,
    folds: Vec<SplitIndices>,
    unaware: Vec<PreprocessPlan>,
    aware: Option<Vec<PreprocessPlan>>,
}

pub fn split_spec(cfg: &ExperimentConfig) -> SplitSpec {
    SplitSpec {
        seed: rng::derive_seed(cfg.seed, "split", 0),
        fractions: cfg.split.fractions,
        n_repeats: cfg.split.n_folds,
        fixed_test: true,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn cache_key(profile: &DatasetProfile, data_dir: &Path, spec: &SplitSpec) -> Result<String> {
    let data = if profile.generator.is_some() {
        "generated".to_string()
    } else {
        let path = profile.data_path(data_dir);
        sha256_hex(&std::fs::read(&path).map_err(CliError::io(&path))?)
    };
    let text = serde_json::to_string(&(profile, data, spec)).map_err(|e| CliError::Core(e.into()))?;
    Ok(sha256_hex(text.as_bytes()))
}

fn read_cache(body_path: &Path, sum_path: &Path, key: &str) -> Option<CacheBody> {
    let text = std::fs::read(body_path).ok()?;
    let stored = std::fs::read_to_string(sum_path).ok()?;
    if stored.trim() != sha256_hex(&text) {
        log::warn!("cache {} failed its checksum; rebuilding", body_path.display());
        return None;
    }
    let body: CacheBody = serde_json::from_slice(&text).ok()?;
    (body.key == key).then_some(body)
}

/// Loads the dataset and returns the cached folds and plans, building and storing
/// them when the cache is missing or corrupt.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let profile = cfg.profile()?;
    let data_dir = cfg.data_dir();
    let table = profile.load(&data_dir)?;
    let spec = split_spec(cfg);
    let key = cache_key(&profile, &data_dir, &spec)?;

    let dir = cfg.out_dir().join("cache");
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let body_path = dir.join(format!("prep-{}.json", &key[..16]));
    let sum_path = body_path.with_extension("sha256");

    if let Some(body) = read_cache(&body_path, &sum_path, &key) {
        if body.n_rows == table.n_rows() {
            return Ok(Prepared {
                profile,
                table,
                folds: body.folds,
                unaware: body.unaware,
                aware: body.aware,
                cache_path: body_path,
                cache_hit: true,
            });
        }
    }

    let folds = split(&table, &spec)?;
    let fit = |aware: bool| -> Result<Vec<PreprocessPlan>> {
        folds
            .iter()
            .map(|f| Ok(fit_preprocess(&table.select_rows(&f.train), aware)?))
            .collect()
    };
    let unaware = fit(false)?;
    let aware = if table.sensitive().is_some() { Some(fit(true)?) } else { None };
    let body = CacheBody {
        key,
        dataset: profile.name.clone(),
        n_rows: table.n_rows(),
        split: spec,
        folds,
        unaware,
        aware,
    };
    let text = serde_json::to_vec(&body).map_err(|e| CliError::Core(e.into()))?;
    std::fs::write(&body_path, &text).map_err(CliError::io(&body_path))?;
    std::fs::write(&sum_path, sha256_hex(&text) + "\n").map_err(CliError::io(&sum_path))?;
    Ok(Prepared {
        profile,
        table,
        folds: body.folds,
        unaware: body.unaware,
        aware: body.aware,
        cache_path: body_path,
        cache_hit: false,
    })
}
