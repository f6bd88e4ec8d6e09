//! Report files: the columnar and nested metric listings plus the table and
//! figure layouts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use xaibench_core::explainers::Method;
use xaibench_core::metrics::{names, Aggregate, MetricReport, PairwiseKind, PairwiseMatrix, ShareSample};

use crate::artifact::{write_atomic, write_csv_text, Stamp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layout {
    Table,
    Boxplot,
    Heatmap,
}

impl Layout {
    pub const ALL: [Layout; 3] = [Layout::Table, Layout::Boxplot, Layout::Heatmap];

    pub fn name(self) -> &'static str {
        match self {
            Layout::Table => "table4-9",
            Layout::Boxplot => "figure-boxplot",
            Layout::Heatmap => "figure-heatmap",
        }
    }
}

impl FromStr for Layout {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match Layout::ALL.into_iter().find(|l| l.name() == s) {
            Some(l) => Ok(l),
            None => {
                let valid: Vec<&str> = Layout::ALL.iter().map(|l| l.name()).collect();
                bail!("unknown layout {s:?}; valid layouts: {}", valid.join(", "))
            }
        }
    }
}

/// Everything the layouts draw on.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub report: MetricReport,
    /// Table row group of each dataset (the Boolean function for grid data).
    pub groups: BTreeMap<String, String>,
    pub shares: Vec<ShareSample>,
    pub pairwise: Vec<PairwiseMatrix>,
}

/// Columns of the table layout, in order.
pub const TABLE_COLUMNS: [(&str, &str); 6] = [
    (names::FEATURES_FOR_THRESHOLD, "features_for_threshold"),
    (names::DISTANCE_TOP1, "distance_top1"),
    (names::ACCURACY_AT_5, "accuracy_at_5"),
    (names::CONSISTENCY, "mean_consistency"),
    (names::STABILITY, "mean_stability"),
    (names::GROUND_TRUTH_DISTANCE, "ground_truth_distance"),
];

fn method_order(name: &str) -> usize {
    name.parse::<Method>().map_or(usize::MAX, |m| Method::ALL.iter().position(|&x| x == m).unwrap_or(Method::ALL.len()))
}

/// Per (group, model, method): the mean over the group's datasets of each
/// metric's per-dataset mean. Missing metrics are `None`.
pub fn table_rows(bundle: &ReportBundle) -> Vec<(String, String, String, Vec<Option<f64>>)> {
    let mut acc: BTreeMap<(String, String, (usize, String)), BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for (key, value) in bundle.report.iter() {
        if key.aggregate != Aggregate::Mean {
            continue;
        }
        let group = bundle.groups.get(&key.dataset).cloned().unwrap_or_else(|| key.dataset.clone());
        let row = (group, key.model.clone(), (method_order(&key.method), key.method.clone()));
        if let Some((metric, _)) = TABLE_COLUMNS.iter().find(|(m, _)| *m == key.metric) {
            acc.entry(row).or_default().entry(metric).or_default().push(value);
        }
    }
    acc.into_iter()
        .map(|((group, model, (_, method)), cols)| {
            let values = TABLE_COLUMNS
                .iter()
                .map(|(m, _)| cols.get(m).map(|v| v.iter().sum::<f64>() / v.len() as f64))
                .collect();
            (group, model, method, values)
        })
        .collect()
}

fn render_report_csv(report: &MetricReport) -> String {
    let mut out = String::from("dataset,model,method,metric,aggregate,value\n");
    for (k, v) in report.iter() {
        writeln!(out, "{},{},{},{},{},{v}", k.dataset, k.model, k.method, k.metric, k.aggregate).expect("string write");
    }
    out
}

#[derive(Serialize)]
struct Nested<'a> {
    stamp: &'a Stamp,
    /// dataset -> model -> method -> metric -> aggregate -> value
    results: BTreeMap<&'a str, BTreeMap<&'a str, BTreeMap<&'a str, BTreeMap<&'a str, BTreeMap<String, f64>>>>>,
}

fn render_report_json(report: &MetricReport, stamp: &Stamp) -> Result<String> {
    let mut nested = Nested { stamp, results: BTreeMap::new() };
    for (k, v) in report.iter() {
        nested
            .results
            .entry(&k.dataset)
            .or_default()
            .entry(&k.model)
            .or_default()
            .entry(&k.method)
            .or_default()
            .entry(&k.metric)
            .or_default()
            .insert(k.aggregate.to_string(), v);
    }
    Ok(serde_json::to_string_pretty(&nested)? + "\n")
}

/// Writes `report.csv` and `report.json` under `dir`.
pub fn write_report(bundle: &ReportBundle, dir: &Path, stamp: &Stamp) -> Result<Vec<PathBuf>> {
    if bundle.report.is_empty() {
        bail!("report is empty; no metrics selected or computed");
    }
    let csv = dir.join("report.csv");
    write_csv_text(&csv, stamp, &render_report_csv(&bundle.report))?;
    let json = dir.join("report.json");
    write_atomic(&json, render_report_json(&bundle.report, stamp)?.as_bytes())?;
    Ok(vec![csv, json])
}

fn fmt2(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn heatmap_path(dir: &Path, p: &PairwiseMatrix) -> PathBuf {
    let kind = match p.kind {
        PairwiseKind::Consistency => "consistency".to_string(),
        PairwiseKind::FeatureAgreement => format!("feature_agreement_k{}", p.k.unwrap_or(0)),
        PairwiseKind::RankAgreement => format!("rank_agreement_k{}", p.k.unwrap_or(0)),
    };
    dir.join("heatmap").join(format!("{}__{}__{kind}.csv", sanitize(&p.dataset), sanitize(&p.model)))
}

/// Files `emit_report` writes for `layout`.
pub fn layout_paths(bundle: &ReportBundle, layout: Layout, dir: &Path) -> Vec<PathBuf> {
    match layout {
        Layout::Table => vec![dir.join("table.csv")],
        Layout::Boxplot => vec![dir.join("boxplot.csv")],
        Layout::Heatmap => {
            let mut v: Vec<PathBuf> = bundle.pairwise.iter().map(|p| heatmap_path(dir, p)).collect();
            v.sort();
            v
        }
    }
}

/// Renders one layout under `dir`, returning the files written.
pub fn emit_report(bundle: &ReportBundle, layout: Layout, dir: &Path, stamp: &Stamp) -> Result<Vec<PathBuf>> {
    if bundle.report.is_empty() {
        bail!("report is empty; no metrics selected or computed");
    }
    match layout {
        Layout::Table => {
            let mut body = String::from("group,model,method");
            for (_, col) in TABLE_COLUMNS {
                body.push(',');
                body.push_str(col);
            }
            body.push('\n');
            for (group, model, method, values) in table_rows(bundle) {
                let cells: Vec<String> = values.into_iter().map(fmt2).collect();
                writeln!(body, "{group},{model},{method},{}", cells.join(",")).expect("string write");
            }
            let path = dir.join("table.csv");
            write_csv_text(&path, stamp, &body)?;
            Ok(vec![path])
        }
        Layout::Boxplot => {
            let mut samples: Vec<&ShareSample> = bundle.shares.iter().collect();
            samples.sort_by(|a, b| {
                (&a.dataset, method_order(a.method.name()), a.instance_id, &a.feature).cmp(&(
                    &b.dataset,
                    method_order(b.method.name()),
                    b.instance_id,
                    &b.feature,
                ))
            });
            let mut body = String::from("dataset,group,method,feature,instance_id,share\n");
            for s in samples {
                let group = bundle.groups.get(&s.dataset).map_or(s.dataset.as_str(), String::as_str);
                writeln!(body, "{},{group},{},{},{},{}", s.dataset, s.method, s.feature, s.instance_id, s.share)
                    .expect("string write");
            }
            let path = dir.join("boxplot.csv");
            write_csv_text(&path, stamp, &body)?;
            Ok(vec![path])
        }
        Layout::Heatmap => {
            let mut written = Vec::new();
            for p in &bundle.pairwise {
                let mut body = String::from("method");
                for m in &p.methods {
                    write!(body, ",{m}").expect("string write");
                }
                body.push('\n');
                for (m, row) in p.methods.iter().zip(&p.values) {
                    body.push_str(m.name());
                    for v in row {
                        write!(body, ",{v:.4}").expect("string write");
                    }
                    body.push('\n');
                }
                let path = heatmap_path(dir, p);
                write_csv_text(&path, stamp, &body)?;
                written.push(path);
            }
            written.sort();
            Ok(written)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle() -> ReportBundle {
        let mut r = MetricReport::new();
        for (ds, v) in [("xor_a", 1.0), ("xor_b", 2.0), ("adult", 3.0)] {
            r.record(ds, "DT", "Kshap", names::FEATURES_FOR_THRESHOLD, &[v]).unwrap();
            r.record(ds, "DT", "LIME", names::STABILITY, &[v / 10.0, v / 5.0]).unwrap();
        }
        let groups = [("xor_a", "XOR"), ("xor_b", "XOR")].into_iter().map(|(a, b)| (a.into(), b.into())).collect();
        ReportBundle {
            report: r,
            groups,
            shares: Vec::new(),
            pairwise: vec![PairwiseMatrix {
                dataset: "adult".into(),
                model: "DT".into(),
                kind: PairwiseKind::FeatureAgreement,
                k: Some(10),
                methods: vec![Method::Kshap, Method::Sshap],
                values: vec![vec![1.0, 0.9], vec![0.9, 1.0]],
            }],
        }
    }

    #[test]
    fn layout_names() {
        for l in Layout::ALL {
            assert_eq!(l.name().parse::<Layout>().unwrap(), l);
        }
        let err = "table".parse::<Layout>().unwrap_err().to_string();
        assert!(err.contains("table4-9") && err.contains("figure-heatmap"), "{err}");
    }

    #[test]
    fn table_groups_datasets() {
        let rows = table_rows(&bundle());
        let names: Vec<(String, String)> = rows.iter().map(|r| (r.0.clone(), r.2.clone())).collect();
        assert_eq!(
            names,
            vec![
                ("XOR".into(), "Kshap".into()),
                ("XOR".into(), "LIME".into()),
                ("adult".into(), "Kshap".into()),
                ("adult".into(), "LIME".into())
            ]
        );
        assert_eq!(rows[0].3[0], Some(1.5));
        assert!((rows[1].3[4].unwrap() - 0.225).abs() < 1e-12);
    }

    #[test]
    fn emitted_files_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let stamp = Stamp::new("c", "s");
        let b = bundle();
        let t = emit_report(&b, Layout::Table, dir.path(), &stamp).unwrap();
        let first = std::fs::read_to_string(&t[0]).unwrap();
        assert!(first.contains("XOR,DT,Kshap,1.50,,,,,"), "{first}");
        emit_report(&b, Layout::Table, dir.path(), &stamp).unwrap();
        assert_eq!(std::fs::read_to_string(&t[0]).unwrap(), first);
        let h = emit_report(&b, Layout::Heatmap, dir.path(), &stamp).unwrap();
        let text = std::fs::read_to_string(&h[0]).unwrap();
        assert!(text.ends_with("method,Kshap,Sshap\nKshap,1.0000,0.9000\nSshap,0.9000,1.0000\n"), "{text}");
        assert!(emit_report(&ReportBundle::default(), Layout::Table, dir.path(), &stamp).is_err());
        let files = write_report(&b, dir.path(), &stamp).unwrap();
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files[1]).unwrap()).unwrap();
        assert_eq!(json["results"]["xor_b"]["DT"]["Kshap"]["features_for_threshold"]["mean"], 2.0);
    }
}
