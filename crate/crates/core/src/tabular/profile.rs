//! Plain-text dataset profiles.
//!
//! A profile is a `key = value` file naming the data file, its delimiter, the column
//! schema and the label/sensitive recodings:
//!
//! ```text
//! name = german
//! file = german_credit.csv
//! delimiter = comma
//! header = true
//! column = duration_in_month | numeric | feature
//! column = personal_status_and_sex | categorical | sensitive
//! column = creditability | categorical | label
//! label_value = good -> 0
//! label_value = bad -> 1
//! sensitive_value = male : single -> 0
//! ```
//!
//! Repeated keys (`column`, `label_value`, `sensitive_value`, `policy_feature`) append.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::table::{load_dataset, Delimiter, Recode, Source, Table};
use super::{ColumnKind, ColumnRole, ColumnSpec};
use crate::{Error, Result};

pub const DATA_DIR_ENV: &str = "CREDIT_DATA_DIR";

/// Data directory: explicit flag, then `CREDIT_DATA_DIR`, then `./data`.
pub fn resolve_data_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Ok(p) = std::env::var(DATA_DIR_ENV) {
        if !p.is_empty() {
            return PathBuf::from(p);
        }
    }
    PathBuf::from("data")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub name: String,
    pub file: String,
    pub delimiter: Delimiter,
    pub header: bool,
    pub missing: Vec<String>,
    pub infer_unlisted: bool,
    pub columns: Vec<ColumnSpec>,
    pub recode: Recode,
    /// Features reserved for the simulated accept/reject policy; empty means a
    /// hash-based partition is used.
    pub policy_features: Vec<String>,
    /// Command that fetches the data file, quoted in missing-data errors.
    pub fetch: Option<String>,
    /// Built-in generator used instead of a file (`synthetic-homecredit`).
    pub generator: Option<String>,
    /// Free-form extra keys (e.g. `f_star`).
    pub extra: BTreeMap<String, String>,
}

impl DatasetProfile {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Profile {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut name = None;
        let mut file = None;
        let mut delimiter = Delimiter::Comma;
        let mut header = true;
        let mut missing = vec!["NA".to_string(), "?".to_string()];
        let mut infer_unlisted = false;
        let mut columns = Vec::new();
        let mut recode = Recode::default();
        let mut policy_features = Vec::new();
        let mut fetch = None;
        let mut generator = None;
        let mut extra = BTreeMap::new();

        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(lineno, format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            let value = value.trim();
            let parse_bool = |v: &str| match v {
                "true" | "yes" => Ok(true),
                "false" | "no" => Ok(false),
                _ => Err(err(lineno, format!("expected true/false, got {v:?}"))),
            };
            match key {
                "name" => name = Some(value.to_string()),
                "file" => file = Some(value.to_string()),
                "delimiter" => {
                    delimiter = Delimiter::parse(value)
                        .ok_or_else(|| err(lineno, format!("unknown delimiter {value:?}")))?
                }
                "header" => header = parse_bool(value)?,
                "infer_unlisted" => infer_unlisted = parse_bool(value)?,
                "missing" => {
                    missing = value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                }
                "column" => {
                    let parts: Vec<&str> = value.split('|').map(str::trim).collect();
                    if parts.len() != 3 {
                        return Err(err(lineno, "column needs `name | kind | role`".into()));
                    }
                    let kind = match parts[1] {
                        "numeric" => ColumnKind::Numeric,
                        "categorical" => ColumnKind::Categorical,
                        k => return Err(err(lineno, format!("unknown kind {k:?}"))),
                    };
                    let role = match parts[2] {
                        "feature" => ColumnRole::Feature,
                        "label" => ColumnRole::Label,
                        "sensitive" => ColumnRole::Sensitive,
                        "ignore" => ColumnRole::Ignore,
                        r => return Err(err(lineno, format!("unknown role {r:?}"))),
                    };
                    columns.push(ColumnSpec::new(parts[0], kind, role));
                }
                "label_value" | "sensitive_value" => {
                    let (raw_value, code) = value
                        .rsplit_once("->")
                        .ok_or_else(|| err(lineno, "expected `raw -> 0|1`".into()))?;
                    let code: u8 = match code.trim() {
                        "0" => 0,
                        "1" => 1,
                        c => return Err(err(lineno, format!("recoding target must be 0/1, got {c:?}"))),
                    };
                    let map = if key == "label_value" {
                        &mut recode.label
                    } else {
                        &mut recode.sensitive
                    };
                    map.insert(raw_value.trim().to_string(), code);
                }
                "policy_feature" => policy_features.push(value.to_string()),
                "fetch" => fetch = Some(value.to_string()),
                "generator" => match value {
                    "synthetic-homecredit" => generator = Some(value.to_string()),
                    g => return Err(err(lineno, format!("unknown generator {g:?}"))),
                },
                _ => {
                    extra.insert(key.to_string(), value.to_string());
                }
            }
        }
        let name = name.ok_or_else(|| err(0, "missing `name`".into()))?;
        let file = file.ok_or_else(|| err(0, "missing `file`".into()))?;
        if !header && infer_unlisted {
            return Err(err(0, "infer_unlisted requires a header".into()));
        }
        if !infer_unlisted && generator.is_none() {
            super::validate_schema(&columns).map_err(|e| err(0, e.to_string()))?;
        }
        Ok(Self {
            name,
            file,
            delimiter,
            header,
            missing,
            infer_unlisted,
            columns,
            recode,
            policy_features,
            fetch,
            generator,
            extra,
        })
    }

    pub fn data_path(&self, data_dir: &Path) -> PathBuf {
        data_dir.join(&self.file)
    }

    pub fn source(&self, data_dir: &Path) -> Source {
        Source {
            path: self.data_path(data_dir),
            delimiter: self.delimiter,
            header: self.header,
            missing: self.missing.clone(),
            infer_unlisted: self.infer_unlisted,
        }
    }

    /// Reads the data file, or runs the generator (`rows` and `data_seed` keys,
    /// defaults 20000 and 0).
    pub fn load(&self, data_dir: &Path) -> Result<Table> {
        if self.generator.is_some() {
            let rows = self.extra_f64("rows").map_or(20_000, |v| v as usize);
            let seed = self.extra_f64("data_seed").map_or(0, |v| v as u64);
            return crate::reject::synthetic_homecredit(rows, seed);
        }
        load_dataset(&self.source(data_dir), &self.columns, &self.recode).map_err(|e| match e {
            Error::MissingData { path, .. } => Error::MissingData {
                path,
                hint: match &self.fetch {
                    Some(f) => format!("run `{f}` or set {DATA_DIR_ENV}"),
                    None => format!("place the file there or set {DATA_DIR_ENV}"),
                },
            },
            other => other,
        })
    }

    pub fn extra_f64(&self, key: &str) -> Option<f64> {
        self.extra.get(key).and_then(|v| v.parse().ok())
    }
}
