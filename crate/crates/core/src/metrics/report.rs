use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Mean,
    Variance,
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::Mean => "mean",
            Aggregate::Variance => "variance",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MetricKey {
    pub dataset: String,
    pub model: String,
    pub method: String,
    pub metric: String,
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    #[serde(flatten)]
    pub key: MetricKey,
    pub value: f64,
}

/// Mean and population variance; `None` for an empty group.
pub fn aggregate(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var))
}

/// Aggregated metric values with unique, ordered keys.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MetricEntry>", into = "Vec<MetricEntry>")]
pub struct MetricReport {
    entries: BTreeMap<MetricKey, f64>,
}

impl MetricReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, key: MetricKey, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite value for {key:?}")));
        }
        if self.entries.contains_key(&key) {
            return Err(Error::InvalidArgument(format!("duplicate metric key {key:?}")));
        }
        self.entries.insert(key, value);
        Ok(())
    }

    /// Adds mean and variance of `values`. Returns `false` (and records
    /// nothing) for an empty group.
    pub fn record(&mut self, dataset: &str, model: &str, method: &str, metric: &str, values: &[f64]) -> Result<bool> {
        let Some((mean, var)) = aggregate(values) else {
            log::warn!("no values for {metric} of {method} on {dataset}/{model}; omitted");
            return Ok(false);
        };
        let key = |aggregate| MetricKey {
            dataset: dataset.to_string(),
            model: model.to_string(),
            method: method.to_string(),
            metric: metric.to_string(),
            aggregate,
        };
        self.insert(key(Aggregate::Mean), mean)?;
        self.insert(key(Aggregate::Variance), var)?;
        Ok(true)
    }

    pub fn get(&self, key: &MetricKey) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn mean(&self, dataset: &str, model: &str, method: &str, metric: &str) -> Option<f64> {
        self.get(&MetricKey {
            dataset: dataset.into(),
            model: model.into(),
            method: method.into(),
            metric: metric.into(),
            aggregate: Aggregate::Mean,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MetricKey, f64)> + '_ {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn merge(&mut self, other: MetricReport) -> Result<()> {
        for (k, v) in other.entries {
            self.insert(k, v)?;
        }
        Ok(())
    }
}

impl TryFrom<Vec<MetricEntry>> for MetricReport {
    type Error = Error;

    fn try_from(rows: Vec<MetricEntry>) -> Result<Self> {
        let mut r = MetricReport::new();
        for e in rows {
            r.insert(e.key, e.value)?;
        }
        Ok(r)
    }
}

impl From<MetricReport> for Vec<MetricEntry> {
    fn from(r: MetricReport) -> Self {
        r.entries.into_iter().map(|(key, value)| MetricEntry { key, value }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[0.7]), Some((0.7, 0.0)));
        assert_eq!(aggregate(&[1.0, 3.0]), Some((2.0, 1.0)));
        assert_eq!(aggregate(&[]), None);
    }

    #[test]
    fn record_rejects_duplicates_and_round_trips() {
        let mut r = MetricReport::new();
        assert!(r.record("d", "DT", "Kshap", "stability", &[0.1, 0.3]).unwrap());
        assert!(!r.record("d", "DT", "Kshap", "other", &[]).unwrap());
        assert!(r.record("d", "DT", "Kshap", "stability", &[0.1]).is_err());
        assert_eq!(r.len(), 2);
        assert!((r.mean("d", "DT", "Kshap", "stability").unwrap() - 0.2).abs() < 1e-15);
        let json = serde_json::to_string(&r).unwrap();
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        let mut bad = MetricReport::new();
        assert!(bad.record("d", "m", "x", "y", &[f64::NAN]).is_err());
    }
}
