use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{validate_schema, ColumnKind, ColumnRole, ColumnSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    Comma,
    Semicolon,
    Tab,
    /// Runs of spaces/tabs separate fields; no quoting.
    Whitespace,
}

impl Delimiter {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "comma" | "," => Some(Self::Comma),
            "semicolon" | ";" => Some(Self::Semicolon),
            "tab" => Some(Self::Tab),
            "whitespace" | "space" => Some(Self::Whitespace),
            _ => None,
        }
    }
}

/// Where and how a delimited file is read.
#[derive(Debug, Clone)]
pub struct Source {
    pub path: PathBuf,
    pub delimiter: Delimiter,
    pub header: bool,
    /// Raw tokens treated as missing (the empty string always is).
    pub missing: Vec<String>,
    /// Columns present in the header but absent from the schema become features with
    /// an inferred kind (numeric when every non-missing value parses).
    pub infer_unlisted: bool,
}

impl Source {
    pub fn new(path: impl Into<PathBuf>, delimiter: Delimiter, header: bool) -> Self {
        Self {
            path: path.into(),
            delimiter,
            header,
            missing: vec!["NA".into(), "?".into()],
            infer_unlisted: false,
        }
    }
}

/// Label and sensitive-attribute recoding rules (raw string → {0,1}).
///
/// An empty label map means the raw label already is `0`/`1`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recode {
    pub label: BTreeMap<String, u8>,
    pub sensitive: BTreeMap<String, u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub spec: ColumnSpec,
    pub data: ColumnData,
}

/// Immutable column-typed dataset with a materialized binary label (1 = default) and
/// optional binary sensitive attribute (1 = unprivileged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    schema: Vec<ColumnSpec>,
    features: Vec<FeatureColumn>,
    labels: Vec<u8>,
    sensitive: Option<Vec<u8>>,
    n_rows: usize,
}

impl Table {
    /// Builds a table from already-typed feature columns.
    pub fn new(
        features: Vec<FeatureColumn>,
        labels: Vec<u8>,
        sensitive: Option<Vec<u8>>,
    ) -> Result<Self> {
        let n_rows = labels.len();
        for col in &features {
            if col.data.len() != n_rows {
                return Err(Error::Schema(format!(
                    "column {:?} has {} rows, expected {n_rows}",
                    col.spec.name,
                    col.data.len()
                )));
            }
            let kind_ok = matches!(
                (&col.data, col.spec.kind),
                (ColumnData::Numeric(_), ColumnKind::Numeric)
                    | (ColumnData::Categorical(_), ColumnKind::Categorical)
            );
            if !kind_ok {
                return Err(Error::Schema(format!(
                    "column {:?} data does not match its declared kind",
                    col.spec.name
                )));
            }
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Schema("labels must be binary".into()));
        }
        if let Some(z) = &sensitive {
            if z.len() != n_rows {
                return Err(Error::Schema("sensitive vector length mismatch".into()));
            }
            if z.iter().any(|&v| v > 1) {
                return Err(Error::Schema("sensitive attribute must be binary".into()));
            }
        }
        let mut schema: Vec<ColumnSpec> = features.iter().map(|c| c.spec.clone()).collect();
        schema.push(ColumnSpec::new("label", ColumnKind::Categorical, ColumnRole::Label));
        if sensitive.is_some() {
            schema.push(ColumnSpec::new(
                "sensitive",
                ColumnKind::Categorical,
                ColumnRole::Sensitive,
            ));
        }
        Ok(Self {
            schema,
            features,
            labels,
            sensitive,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Full schema, including label/sensitive/ignored columns.
    pub fn schema(&self) -> &[ColumnSpec] {
        &self.schema
    }

    pub fn features(&self) -> &[FeatureColumn] {
        &self.features
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureColumn> {
        self.features.iter().find(|c| c.spec.name == name)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|c| c.spec.name == name)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sensitive(&self) -> Option<&[u8]> {
        self.sensitive.as_deref()
    }

    pub fn positive_rate(&self) -> f64 {
        if self.n_rows == 0 {
            return 0.0;
        }
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.n_rows as f64
    }

    /// Row subset (rows may repeat).
    pub fn select_rows(&self, rows: &[usize]) -> Table {
        Table {
            schema: self.schema.clone(),
            features: self
                .features
                .iter()
                .map(|c| FeatureColumn {
                    spec: c.spec.clone(),
                    data: c.data.select(rows),
                })
                .collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            sensitive: self
                .sensitive
                .as_ref()
                .map(|z| rows.iter().map(|&i| z[i]).collect()),
            n_rows: rows.len(),
        }
    }

    /// Keeps only the named feature columns (label and sensitive are retained).
    pub fn select_features(&self, names: &[String]) -> Result<Table> {
        let mut features = Vec::with_capacity(names.len());
        for name in names {
            let col = self
                .feature(name)
                .ok_or_else(|| Error::Schema(format!("unknown feature {name:?}")))?;
            features.push(col.clone());
        }
        let mut out = Table::new(features, self.labels.clone(), self.sensitive.clone())?;
        // keep the original label/sensitive/ignore specs
        out.schema = out
            .features
            .iter()
            .map(|c| c.spec.clone())
            .chain(
                self.schema
                    .iter()
                    .filter(|c| c.role != ColumnRole::Feature)
                    .cloned(),
            )
            .collect();
        Ok(out)
    }
}

fn split_line(line: &str, delimiter: Delimiter) -> Vec<String> {
    match delimiter {
        Delimiter::Whitespace => line.split_whitespace().map(str::to_string).collect(),
        _ => unreachable!("quoted delimiters are read with the csv reader"),
    }
}

fn read_records(source: &Source) -> Result<Vec<(usize, Vec<String>)>> {
    let file = File::open(&source.path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingData {
                path: source.path.clone(),
                hint: "see scripts/fetch_data.sh".into(),
            }
        } else {
            Error::Io(e)
        }
    })?;
    let mut records = Vec::new();
    match source.delimiter {
        Delimiter::Whitespace => {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                records.push((i + 1, split_line(&line, source.delimiter)));
            }
        }
        d => {
            let byte = match d {
                Delimiter::Comma => b',',
                Delimiter::Semicolon => b';',
                Delimiter::Tab => b'\t',
                Delimiter::Whitespace => unreachable!(),
            };
            let mut reader = csv::ReaderBuilder::new()
                .delimiter(byte)
                .has_headers(false)
                .flexible(true)
                .from_reader(file);
            for (i, rec) in reader.records().enumerate() {
                let rec = rec?;
                if rec.len() == 1 && rec[0].trim().is_empty() {
                    continue;
                }
                let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
                records.push((line, rec.iter().map(|s| s.trim().to_string()).collect()));
            }
        }
    }
    Ok(records)
}

/// Reads a delimited file into a [`Table`].
///
/// With a header, schema columns are matched by name; without one the schema lists
/// the file's columns in order. The label is recoded to {0 good, 1 bad} and the
/// sensitive column to {0 privileged, 1 unprivileged}.
pub fn load_dataset(source: &Source, schema: &[ColumnSpec], recode: &Recode) -> Result<Table> {
    let mut records = read_records(source)?;
    let header: Vec<String> = if source.header {
        if records.is_empty() {
            return Err(Error::Parse {
                row: 0,
                message: "empty file: no header and zero rows".into(),
            });
        }
        records.remove(0).1
    } else {
        schema.iter().map(|c| c.name.clone()).collect()
    };
    if records.is_empty() {
        return Err(Error::Parse {
            row: 0,
            message: "zero data rows".into(),
        });
    }
    let width = header.len();
    for (line, rec) in &records {
        if rec.len() != width {
            return Err(Error::Parse {
                row: *line,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
    }
    let is_missing = |s: &str| s.is_empty() || source.missing.iter().any(|m| m == s);

    // resolve every header column to a spec
    let mut specs: Vec<ColumnSpec> = Vec::with_capacity(width);
    for (j, name) in header.iter().enumerate() {
        if let Some(spec) = schema.iter().find(|c| &c.name == name) {
            specs.push(spec.clone());
        } else if source.infer_unlisted {
            let numeric = records
                .iter()
                .map(|(_, r)| r[j].as_str())
                .filter(|s| !is_missing(s))
                .all(|s| s.parse::<f64>().is_ok());
            let kind = if numeric {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            };
            specs.push(ColumnSpec::new(name.clone(), kind, ColumnRole::Feature));
        } else {
            return Err(Error::Schema(format!("column {name:?} not in schema")));
        }
    }
    for spec in schema {
        if !header.contains(&spec.name) {
            return Err(Error::Schema(format!("schema column {:?} not in file", spec.name)));
        }
    }
    validate_schema(&specs)?;

    let mut features = Vec::new();
    let mut labels = Vec::with_capacity(records.len());
    let mut sensitive = None;
    for (j, spec) in specs.iter().enumerate() {
        match spec.role {
            ColumnRole::Ignore => {}
            ColumnRole::Label => {
                for (line, rec) in &records {
                    let raw = rec[j].as_str();
                    let y = if recode.label.is_empty() {
                        match raw {
                            "0" => Some(0),
                            "1" => Some(1),
                            _ => None,
                        }
                    } else {
                        recode.label.get(raw).copied()
                    };
                    let y = y.ok_or_else(|| {
                        Error::Schema(format!(
                            "unknown category {raw:?} in label column {:?} (line {line})",
                            spec.name
                        ))
                    })?;
                    labels.push(y);
                }
            }
            ColumnRole::Sensitive => {
                let mut z = Vec::with_capacity(records.len());
                for (line, rec) in &records {
                    let raw = rec[j].as_str();
                    let v = recode.sensitive.get(raw).copied().ok_or_else(|| {
                        Error::Schema(format!(
                            "value {raw:?} of sensitive column {:?} has no recoding (line {line})",
                            spec.name
                        ))
                    })?;
                    z.push(v);
                }
                sensitive = Some(z);
            }
            ColumnRole::Feature => {
                let data = match spec.kind {
                    ColumnKind::Numeric => {
                        let mut v = Vec::with_capacity(records.len());
                        for (line, rec) in &records {
                            let raw = rec[j].as_str();
                            if is_missing(raw) {
                                v.push(None);
                            } else {
                                let x = raw.parse::<f64>().map_err(|_| Error::Parse {
                                    row: *line,
                                    message: format!(
                                        "column {:?}: {raw:?} is not numeric",
                                        spec.name
                                    ),
                                })?;
                                v.push(if x.is_finite() { Some(x) } else { None });
                            }
                        }
                        ColumnData::Numeric(v)
                    }
                    ColumnKind::Categorical => ColumnData::Categorical(
                        records
                            .iter()
                            .map(|(_, rec)| {
                                let raw = rec[j].as_str();
                                (!is_missing(raw)).then(|| raw.to_string())
                            })
                            .collect(),
                    ),
                };
                features.push(FeatureColumn {
                    spec: spec.clone(),
                    data,
                });
            }
        }
    }
    let mut table = Table::new(features, labels, sensitive)?;
    table.schema = specs;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn schema() -> Vec<ColumnSpec> {
        vec![
            ColumnSpec::numeric("amount"),
            ColumnSpec::categorical("purpose"),
            ColumnSpec::new("sex", ColumnKind::Categorical, ColumnRole::Sensitive),
            ColumnSpec::new("y", ColumnKind::Categorical, ColumnRole::Label),
        ]
    }

    fn recode() -> Recode {
        Recode {
            label: [("good".to_string(), 0), ("bad".to_string(), 1)].into(),
            sensitive: [("m".to_string(), 0), ("f".to_string(), 1)].into(),
        }
    }

    #[test]
    fn reads_whitespace_file_without_header() {
        let f = write("10 car m good\n20 tv f bad\nNA tv f good\n");
        let src = Source::new(f.path(), Delimiter::Whitespace, false);
        let t = load_dataset(&src, &schema(), &recode()).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.labels(), &[0, 1, 0]);
        assert_eq!(t.sensitive().unwrap(), &[0, 1, 1]);
        match &t.features()[0].data {
            ColumnData::Numeric(v) => assert_eq!(v, &vec![Some(10.0), Some(20.0), None]),
            _ => panic!(),
        }
    }

    #[test]
    fn reads_quoted_csv_with_header() {
        let f = write("purpose,amount,y,sex\n\"a, b\",1,good,m\nc,2,bad,f\n");
        let src = Source::new(f.path(), Delimiter::Comma, true);
        let t = load_dataset(&src, &schema(), &recode()).unwrap();
        assert_eq!(t.n_rows(), 2);
        match &t.feature("purpose").unwrap().data {
            ColumnData::Categorical(v) => assert_eq!(v[0].as_deref(), Some("a, b")),
            _ => panic!(),
        }
    }

    #[test]
    fn arity_mismatch_reports_row() {
        let f = write("10 car m good\n20 tv f\n");
        let src = Source::new(f.path(), Delimiter::Whitespace, false);
        match load_dataset(&src, &schema(), &recode()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_is_schema_error() {
        let f = write("10 car m good\n20 tv f maybe\n");
        let src = Source::new(f.path(), Delimiter::Whitespace, false);
        assert!(matches!(
            load_dataset(&src, &schema(), &recode()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn empty_file_is_parse_error() {
        let f = write("");
        let src = Source::new(f.path(), Delimiter::Whitespace, false);
        assert!(matches!(
            load_dataset(&src, &schema(), &recode()),
            Err(Error::Parse { .. })
        ));
        let src = Source::new(f.path(), Delimiter::Comma, true);
        assert!(matches!(
            load_dataset(&src, &schema(), &recode()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn infers_unlisted_columns() {
        let f = write("id,x,c,y,sex\n1,0.5,a,good,m\n2,,b,bad,f\n");
        let mut src = Source::new(f.path(), Delimiter::Comma, true);
        src.infer_unlisted = true;
        let schema = vec![
            ColumnSpec::new("id", ColumnKind::Numeric, ColumnRole::Ignore),
            ColumnSpec::new("sex", ColumnKind::Categorical, ColumnRole::Sensitive),
            ColumnSpec::new("y", ColumnKind::Categorical, ColumnRole::Label),
        ];
        let t = load_dataset(&src, &schema, &recode()).unwrap();
        assert_eq!(t.features().len(), 2);
        assert_eq!(t.feature("x").unwrap().spec.kind, ColumnKind::Numeric);
        assert_eq!(t.feature("c").unwrap().spec.kind, ColumnKind::Categorical);
    }

    #[test]
    fn missing_file_is_actionable() {
        let src = Source::new("/nonexistent/german.data", Delimiter::Whitespace, false);
        assert!(matches!(
            load_dataset(&src, &schema(), &recode()),
            Err(Error::MissingData { .. })
        ));
    }
}
