//! Ordinal encoding of discrete columns and median/mode imputation.

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind, Matrix, RawDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CategoryOrder {
    /// Numeric order when every category parses as a number, else lexicographic.
    #[default]
    Sorted,
    FirstSeen,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingPolicy {
    pub order: CategoryOrder,
}

/// Persisted category → integer mapping for one discrete column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTable {
    categories: Vec<String>,
}

impl CategoryTable {
    pub fn code(&self, category: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == category)
    }

    pub fn decode(&self, code: usize) -> Option<&str> {
        self.categories.get(code).map(String::as_str)
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnEncoder {
    Continuous { name: String, median: f64 },
    Discrete { name: String, table: CategoryTable, mode: usize },
}

impl ColumnEncoder {
    pub fn name(&self) -> &str {
        match self {
            ColumnEncoder::Continuous { name, .. } | ColumnEncoder::Discrete { name, .. } => name,
        }
    }
}

/// Fitted encoder; reusable on new rows with the same columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub columns: Vec<ColumnEncoder>,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn parse_number(raw: &RawDataset, row: usize, col: usize, v: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::Parse {
            path: raw.provenance.clone().into(),
            row: row + 2,
            message: format!("column `{}`: `{v}` is not a finite number", raw.feature_names[col]),
        }),
    }
}

impl Encoder {
    pub fn fit(raw: &RawDataset, policy: &EncodingPolicy) -> Result<Self> {
        let mut columns = Vec::with_capacity(raw.n_features());
        for (j, (name, kind)) in raw.feature_names.iter().zip(&raw.feature_kinds).enumerate() {
            let present: Vec<(usize, &str)> =
                raw.cells.iter().enumerate().filter_map(|(i, r)| r[j].as_deref().map(|v| (i, v))).collect();
            if present.is_empty() {
                return Err(Error::InvalidDataset(format!("column `{name}` has no observed values")));
            }
            let enc = match kind {
                FeatureKind::Continuous => {
                    let vals = present
                        .iter()
                        .map(|&(i, v)| parse_number(raw, i, j, v))
                        .collect::<Result<Vec<_>>>()?;
                    ColumnEncoder::Continuous { name: name.clone(), median: median(vals) }
                }
                FeatureKind::Discrete => {
                    let mut cats: Vec<String> = Vec::new();
                    for &(_, v) in &present {
                        if !cats.iter().any(|c| c == v) {
                            cats.push(v.to_string());
                        }
                    }
                    if policy.order == CategoryOrder::Sorted {
                        let numeric: Option<Vec<f64>> = cats.iter().map(|c| c.parse::<f64>().ok()).collect();
                        match numeric {
                            Some(_) => cats.sort_by(|a, b| {
                                a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap())
                            }),
                            None => cats.sort(),
                        }
                    }
                    let table = CategoryTable { categories: cats };
                    let mut counts = vec![0usize; table.len()];
                    for &(_, v) in &present {
                        counts[table.code(v).expect("category collected above")] += 1;
                    }
                    // most frequent, lowest code on ties
                    let mode = counts
                        .iter()
                        .enumerate()
                        .fold((0, 0), |best, (c, &n)| if n > best.1 { (c, n) } else { best })
                        .0;
                    ColumnEncoder::Discrete { name: name.clone(), table, mode }
                }
            };
            columns.push(enc);
        }
        Ok(Self { columns })
    }

    pub fn transform<T: Scalar>(&self, raw: &RawDataset) -> Result<Dataset<T>> {
        if raw.n_features() != self.columns.len() {
            return Err(Error::Dimension { expected: self.columns.len(), got: raw.n_features() });
        }
        for (enc, name) in self.columns.iter().zip(&raw.feature_names) {
            if enc.name() != name {
                return Err(Error::Schema(format!("expected column `{}`, found `{name}`", enc.name())));
            }
        }
        let m = self.columns.len();
        let mut data = Vec::with_capacity(raw.len() * m);
        let mut imputed = vec![0usize; m];
        for (i, row) in raw.cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let v = match (&self.columns[j], cell) {
                    (ColumnEncoder::Continuous { median, .. }, None) => {
                        imputed[j] += 1;
                        *median
                    }
                    (ColumnEncoder::Continuous { .. }, Some(v)) => parse_number(raw, i, j, v)?,
                    (ColumnEncoder::Discrete { mode, .. }, None) => {
                        imputed[j] += 1;
                        *mode as f64
                    }
                    (ColumnEncoder::Discrete { table, name, .. }, Some(v)) => table
                        .code(v)
                        .ok_or_else(|| Error::UnseenCategory { column: name.clone(), value: v.clone() })?
                        as f64,
                };
                data.push(T::lit(v));
            }
        }
        let notes: Vec<String> = imputed
            .iter()
            .zip(&self.columns)
            .filter(|(&k, _)| k > 0)
            .map(|(k, c)| format!("{}({k})", c.name()))
            .collect();
        let provenance = if notes.is_empty() {
            raw.provenance.clone()
        } else {
            format!("{}; imputed median/mode: {}", raw.provenance, notes.join(","))
        };
        Dataset::new(
            Matrix::new(raw.len(), m, data)?,
            raw.labels.clone(),
            raw.feature_names.clone(),
            raw.feature_kinds.clone(),
            provenance,
        )
    }

    pub fn table(&self, column: &str) -> Option<&CategoryTable> {
        self.columns.iter().find_map(|c| match c {
            ColumnEncoder::Discrete { name, table, .. } if name == column => Some(table),
            _ => None,
        })
    }
}

/// Fits an encoder on `raw` and applies it.
pub fn encode<T: Scalar>(raw: &RawDataset, policy: &EncodingPolicy) -> Result<(Dataset<T>, Encoder)> {
    let encoder = Encoder::fit(raw, policy)?;
    let ds = encoder.transform(raw)?;
    Ok((ds, encoder))
}
