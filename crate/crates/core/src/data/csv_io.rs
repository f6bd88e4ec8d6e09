//! CSV ingestion into an untyped table, ahead of encoding.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::FeatureKind;
use crate::error::{Error, Result};

/// Cell values treated as missing.
pub const MISSING_SENTINELS: [&str; 2] = ["", "?"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Continuous,
    Discrete,
    Ignore,
}

/// Sidecar description of a CSV dataset.
///
/// ```toml
/// name = "heart"
/// label = "target"
/// positive_label = "1"          # optional; otherwise labels must be 0/1
/// # negative_label = "0"        # alternative: everything else is positive
/// # header = ["age", ...]       # for files without a header row
/// # delimiter = " "
/// url = "https://archive.ics.uci.edu/..."
/// file = "heart.csv"
/// default_kind = "continuous"
/// [columns]
/// sex = "discrete"
/// id = "ignore"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    #[serde(default)]
    pub name: Option<String>,
    pub label: String,
    #[serde(default)]
    pub positive_label: Option<String>,
    #[serde(default)]
    pub negative_label: Option<String>,
    /// Column names for files that have no header row.
    #[serde(default)]
    pub header: Vec<String>,
    #[serde(default)]
    pub delimiter: Option<char>,
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default)]
    pub file: Option<String>,
    #[serde(default = "default_kind")]
    pub default_kind: ColumnRole,
    #[serde(default)]
    pub columns: BTreeMap<String, ColumnRole>,
}

fn default_kind() -> ColumnRole {
    ColumnRole::Continuous
}

impl DatasetSchema {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            name: None,
            label: label.into(),
            positive_label: None,
            negative_label: None,
            header: Vec::new(),
            delimiter: None,
            url: None,
            file: None,
            default_kind: ColumnRole::Continuous,
            columns: BTreeMap::new(),
        }
    }

    pub fn with_column(mut self, name: impl Into<String>, role: ColumnRole) -> Self {
        self.columns.insert(name.into(), role);
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }

    fn role_of(&self, column: &str) -> ColumnRole {
        self.columns.get(column).copied().unwrap_or(self.default_kind)
    }
}

/// Parsed CSV with string cells; `None` marks a missing value.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub feature_names: Vec<String>,
    pub feature_kinds: Vec<FeatureKind>,
    /// Row-major cells, one inner vector per instance.
    pub cells: Vec<Vec<Option<String>>>,
    pub labels: Vec<u8>,
    pub provenance: String,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_none()).count()
    }
}

fn parse_label(raw: &str, schema: &DatasetSchema) -> Option<u8> {
    if let Some(pos) = &schema.positive_label {
        return Some(u8::from(raw.trim_end_matches('.') == pos.as_str()));
    }
    if let Some(neg) = &schema.negative_label {
        return Some(u8::from(raw.trim_end_matches('.') != neg.as_str()));
    }
    match raw.parse::<f64>() {
        Ok(v) if v == 0.0 => Some(0),
        Ok(v) if v == 1.0 => Some(1),
        _ => None,
    }
}

/// Reads a delimited file (comma by default) with a header row, unless the
/// schema supplies the column names. Lines starting with `#` are comments.
pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<RawDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path.to_path_buf(), schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, path: PathBuf, schema: &DatasetSchema) -> Result<RawDataset> {
    let delimiter = schema.delimiter.unwrap_or(',');
    if !delimiter.is_ascii() {
        return Err(Error::Schema(format!("delimiter {delimiter:?} is not a single byte")));
    }
    let named = !schema.header.is_empty();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(!named)
        .delimiter(delimiter as u8)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let columns: Vec<String> = if named {
        schema.header.clone()
    } else {
        let header = rdr.headers().map_err(|e| Error::Parse { path: path.clone(), row: 0, message: e.to_string() })?;
        header.iter().map(str::to_string).collect()
    };

    let label_hits: Vec<usize> =
        columns.iter().enumerate().filter(|(_, c)| **c == schema.label).map(|(i, _)| i).collect();
    let label_idx = match label_hits.as_slice() {
        [i] => *i,
        [] => return Err(Error::Schema(format!("label column `{}` not found in {}", schema.label, path.display()))),
        _ => return Err(Error::Schema(format!("label column `{}` appears more than once", schema.label))),
    };
    for name in schema.columns.keys() {
        if !columns.contains(name) {
            return Err(Error::Schema(format!("schema column `{name}` not in file header")));
        }
    }

    let mut feature_cols = Vec::new();
    let mut feature_kinds = Vec::new();
    for (i, c) in columns.iter().enumerate() {
        if i == label_idx {
            continue;
        }
        match schema.role_of(c) {
            ColumnRole::Ignore => {}
            ColumnRole::Continuous => {
                feature_cols.push(i);
                feature_kinds.push(FeatureKind::Continuous);
            }
            ColumnRole::Discrete => {
                feature_cols.push(i);
                feature_kinds.push(FeatureKind::Discrete);
            }
        }
    }

    let mut cells = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        // with a header line, data rows are numbered from 2
        let row = if named { r + 1 } else { r + 2 };
        let rec = rec.map_err(|e| Error::Parse { path: path.clone(), row, message: e.to_string() })?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != columns.len() {
            return Err(Error::Parse {
                path: path.clone(),
                row,
                message: format!("expected {} columns, found {}", columns.len(), rec.len()),
            });
        }
        let raw_label = &rec[label_idx];
        let y = parse_label(raw_label, schema).ok_or_else(|| Error::NonBinaryLabel {
            path: path.clone(),
            row,
            column: schema.label.clone(),
            value: raw_label.to_string(),
        })?;
        labels.push(y);
        cells.push(
            feature_cols
                .iter()
                .map(|&c| {
                    let v = &rec[c];
                    (!MISSING_SENTINELS.contains(&v)).then(|| v.to_string())
                })
                .collect(),
        );
    }

    Ok(RawDataset {
        feature_names: feature_cols.iter().map(|&c| columns[c].clone()).collect(),
        feature_kinds,
        cells,
        labels,
        provenance: path.display().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, schema: &DatasetSchema) -> Result<RawDataset> {
        read_csv(text.as_bytes(), PathBuf::from("mem.csv"), schema)
    }

    #[test]
    fn four_rows_three_columns() {
        let raw = read("a,b,y\n1,2,0\n3,4,1\n5,6,1\n7,8,0\n", &DatasetSchema::new("y")).unwrap();
        assert_eq!(raw.len(), 4);
        assert_eq!(raw.n_features(), 2);
        assert_eq!(raw.labels, vec![0, 1, 1, 0]);
        assert_eq!(raw.feature_names, vec!["a", "b"]);
    }

    #[test]
    fn label_value_two_is_rejected() {
        let err = read("a,y\n1,0\n2,2\n", &DatasetSchema::new("y")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("non-binary label"), "{msg}");
        assert!(msg.contains("row 3"), "{msg}");
    }

    #[test]
    fn column_count_mismatch_names_row() {
        let err = read("a,b,y\n1,2,0\n1,1\n", &DatasetSchema::new("y")).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }

    #[test]
    fn missing_label_column() {
        assert!(matches!(read("a,b\n1,2\n", &DatasetSchema::new("y")), Err(Error::Schema(_))));
    }

    #[test]
    fn sentinels_ignored_columns_and_positive_label() {
        let schema = DatasetSchema::new("income")
            .with_column("id", ColumnRole::Ignore)
            .with_column("job", ColumnRole::Discrete);
        let schema = DatasetSchema { positive_label: Some(">50K".into()), ..schema };
        let raw = read("id,age,job,income\n1,39, ?,<=50K\n2,,clerk, >50K.\n", &schema).unwrap();
        assert_eq!(raw.feature_names, vec!["age", "job"]);
        assert_eq!(raw.feature_kinds, vec![FeatureKind::Continuous, FeatureKind::Discrete]);
        assert_eq!(raw.labels, vec![0, 1]);
        assert_eq!(raw.cells[0], vec![Some("39".into()), None]);
        assert_eq!(raw.cells[1], vec![None, Some("clerk".into())]);
        assert_eq!(raw.missing_count(), 2);
    }

    #[test]
    fn schema_from_toml() {
        let s = DatasetSchema::from_toml_str(
            "label = \"num\"\nurl = \"http://x\"\n[columns]\nsex = \"discrete\"\nid = \"ignore\"\n",
        )
        .unwrap();
        assert_eq!(s.label, "num");
        assert_eq!(s.role_of("sex"), ColumnRole::Discrete);
        assert_eq!(s.role_of("age"), ColumnRole::Continuous);
    }

    #[test]
    fn headerless_space_delimited_with_negative_label() {
        let schema = DatasetSchema {
            header: vec!["status".into(), "months".into(), "class".into()],
            delimiter: Some(' '),
            negative_label: Some("1".into()),
            ..DatasetSchema::new("class").with_column("status", ColumnRole::Discrete)
        };
        let raw = read("A11 6 1\nA12 48 2\n", &schema).unwrap();
        assert_eq!(raw.feature_names, vec!["status", "months"]);
        assert_eq!(raw.labels, vec![0, 1]);
        let err = read("A11 6 1\nA12 48\n", &schema).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }
}
