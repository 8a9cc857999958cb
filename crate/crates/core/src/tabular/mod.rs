//! Typed tabular datasets, dataset profiles, preprocessing and splits.

mod preprocess;
mod profile;
mod split;
mod table;

pub use preprocess::{apply_preprocess, fit_preprocess, ColumnPlan, Design, PreprocessPlan, OTHER};
pub use profile::{resolve_data_dir, DatasetProfile, DATA_DIR_ENV};
pub use split::{split, split_labels, SplitIndices, SplitSpec};
pub use table::{load_dataset, ColumnData, Delimiter, FeatureColumn, Recode, Source, Table};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Feature,
    Label,
    Sensitive,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind, role: ColumnRole) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
        }
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Numeric, ColumnRole::Feature)
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical, ColumnRole::Feature)
    }
}

/// Checks the schema invariants: unique names, exactly one label, at most one
/// sensitive column.
pub fn validate_schema(schema: &[ColumnSpec]) -> crate::Result<()> {
    let mut seen = std::collections::HashSet::new();
    for col in schema {
        if !seen.insert(col.name.as_str()) {
            return Err(crate::Error::Schema(format!("duplicate column name {:?}", col.name)));
        }
    }
    let labels = schema.iter().filter(|c| c.role == ColumnRole::Label).count();
    if labels != 1 {
        return Err(crate::Error::Schema(format!(
            "expected exactly one label column, found {labels}"
        )));
    }
    let sensitive = schema.iter().filter(|c| c.role == ColumnRole::Sensitive).count();
    if sensitive > 1 {
        return Err(crate::Error::Schema(format!(
            "at most one sensitive column allowed, found {sensitive}"
        )));
    }
    Ok(())
}
