use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::agreement::{consistency, feature_agreement, rank_agreement, ranking};
use super::compactness::{compactness, summarize_compactness, CompactnessCurve};
use super::normalize::{normalize, NormalizedAttribution};
use super::report::MetricReport;
use super::stability::stability;
use crate::data::{FeatureStats, Matrix};
use crate::error::{Error, Result};
use crate::explainers::{Attribution, Method};
use crate::model::Model;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    pub agreement_k: Vec<usize>,
    pub stability_neighbors: usize,
    pub compactness_threshold: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams { agreement_k: vec![1, 2, 5, 10], stability_neighbors: 10, compactness_threshold: 0.9 }
    }
}

/// The explained points of one (dataset, model) cell and every method's
/// attributions for them.
pub struct CellInput<'a, T, M: ?Sized> {
    pub dataset: &'a str,
    pub model_name: &'a str,
    pub model: &'a M,
    pub feature_names: &'a [String],
    /// Explained instances; row `i` has id `instance_ids[i]`.
    pub points: &'a Matrix<T>,
    pub instance_ids: &'a [usize],
    pub attributions: &'a [(Method, Vec<Attribution<T>>)],
    /// Masking values for compactness.
    pub means: &'a [T],
    pub stats: &'a FeatureStats<T>,
    /// Normalized ground-truth shares, for synthetic data.
    pub ground_truth: Option<&'a [f64]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareSample {
    pub dataset: String,
    pub method: Method,
    pub instance_id: usize,
    pub feature: String,
    pub share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwiseKind {
    Consistency,
    FeatureAgreement,
    RankAgreement,
}

/// Method-by-method matrix of a pairwise statistic averaged over the
/// instances explained by every method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub dataset: String,
    pub model: String,
    pub kind: PairwiseKind,
    pub k: Option<usize>,
    pub methods: Vec<Method>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellOutput {
    pub report: MetricReport,
    pub shares: Vec<ShareSample>,
    pub pairwise: Vec<PairwiseMatrix>,
    pub notes: Vec<String>,
}

pub mod names {
    pub const CONSISTENCY: &str = "consistency";
    pub const GROUND_TRUTH_DISTANCE: &str = "ground_truth_distance";
    pub const STABILITY: &str = "stability";
    pub const FEATURES_FOR_THRESHOLD: &str = "features_for_threshold";
    pub const DISTANCE_TOP1: &str = "distance_top1";
    pub const ACCURACY_AT_5: &str = "accuracy_at_5";
    pub const EFFICIENCY_GAP: &str = "efficiency_gap";
}

fn pairwise(
    cell: (&str, &str),
    kind: PairwiseKind,
    k: Option<usize>,
    methods: &[Method],
    per_method: &[f64],
) -> PairwiseMatrix {
    PairwiseMatrix {
        dataset: cell.0.to_string(),
        model: cell.1.to_string(),
        kind,
        k,
        methods: methods.to_vec(),
        values: (0..methods.len())
            .map(|a| (0..methods.len()).map(|b| per_method[a * methods.len() + b]).collect())
            .collect(),
    }
}

/// Computes every metric for one (dataset, model) cell.
pub fn evaluate_cell<T: Scalar, M: Model<T> + ?Sized>(input: &CellInput<'_, T, M>, params: &MetricParams) -> Result<CellOutput> {
    let n = input.points.nrows();
    let m = input.points.ncols();
    if input.instance_ids.len() != n || input.feature_names.len() != m {
        return Err(Error::Dimension { expected: n, got: input.instance_ids.len() });
    }
    let mut out = CellOutput::default();
    let (ds, model_name) = (input.dataset, input.model_name);
    let row_of = |id: usize| input.instance_ids.iter().position(|&x| x == id);
    let predicted: Vec<u8> = (0..n).map(|i| input.model.predict_label(input.points.row(i))).collect();

    let mut normalized: Vec<(Method, Vec<Option<NormalizedAttribution>>)> = Vec::new();
    for (method, batch) in input.attributions {
        let mut by_row: Vec<Option<NormalizedAttribution>> = vec![None; n];
        let mut by_row_raw: Vec<Option<&Attribution<T>>> = vec![None; n];
        for a in batch {
            let r = row_of(a.instance_id).ok_or_else(|| {
                Error::InvalidArgument(format!("{method} explained unknown instance {}", a.instance_id))
            })?;
            by_row[r] = Some(normalize(a));
            by_row_raw[r] = Some(a);
        }
        let rows: Vec<usize> = (0..n).filter(|&r| by_row[r].is_some()).collect();
        let label = method.name();
        let degenerate = rows.iter().filter(|&&r| by_row[r].as_ref().is_some_and(|a| a.degenerate)).count();
        if degenerate > 0 {
            out.notes.push(format!("{ds}/{model_name}/{label}: {degenerate} all-zero attributions given uniform shares"));
        }

        for &r in &rows {
            let s = by_row[r].as_ref().expect("present");
            for (f, share) in s.shares.iter().enumerate() {
                out.shares.push(ShareSample {
                    dataset: ds.to_string(),
                    method: *method,
                    instance_id: s.instance_id,
                    feature: input.feature_names[f].clone(),
                    share: *share,
                });
            }
        }

        if let Some(gt) = input.ground_truth {
            let d = rows
                .iter()
                .map(|&r| consistency(&by_row[r].as_ref().expect("present").shares, gt))
                .collect::<Result<Vec<_>>>()?;
            out.report.record(ds, model_name, label, names::GROUND_TRUTH_DISTANCE, &d)?;
        }

        if method.is_additive() {
            let gaps: Vec<f64> = rows
                .iter()
                .map(|&r| by_row_raw[r].expect("present").efficiency_gap().abs().as_f64())
                .collect();
            out.report.record(ds, model_name, label, names::EFFICIENCY_GAP, &gaps)?;
        }

        if rows.len() > params.stability_neighbors {
            let shares: Vec<Vec<f64>> = rows.iter().map(|&r| by_row[r].as_ref().expect("present").shares.clone()).collect();
            let pts = input.points.select_rows(&rows);
            let pred: Vec<u8> = rows.iter().map(|&r| predicted[r]).collect();
            let st = stability(&shares, &pts, &pred, input.stats, params.stability_neighbors)?;
            let fallback = st.iter().filter(|v| v.fallback).count();
            if fallback > 0 {
                out.notes.push(format!(
                    "{ds}/{model_name}/{label}: {fallback} instances had no same-class neighbour; all neighbours used"
                ));
            }
            let vals: Vec<f64> = st.iter().map(|v| v.value).collect();
            out.report.record(ds, model_name, label, names::STABILITY, &vals)?;
        } else {
            out.notes.push(format!(
                "{ds}/{model_name}/{label}: stability omitted, {} explained instances for {} neighbours",
                rows.len(),
                params.stability_neighbors
            ));
        }

        let curves: Vec<CompactnessCurve> = rows
            .par_iter()
            .map(|&r| {
                compactness(input.model, input.points.row(r), &by_row_raw[r].expect("present").values, input.means)
            })
            .collect::<Result<_>>()?;
        if !curves.is_empty() {
            let s = summarize_compactness(&curves, params.compactness_threshold)?;
            out.report.record(ds, model_name, label, names::FEATURES_FOR_THRESHOLD, &[s.k_needed as f64])?;
            out.report.record(ds, model_name, label, names::ACCURACY_AT_5, &[s.accuracy_at_5])?;
            let d1: Vec<f64> = curves.iter().map(|c| c.distance[0]).collect();
            out.report.record(ds, model_name, label, names::DISTANCE_TOP1, &d1)?;
        }
        normalized.push((*method, by_row));
    }

    // Pairwise statistics over the instances every method explained.
    let common: Vec<usize> = (0..n).filter(|&r| normalized.iter().all(|(_, v)| v[r].is_some())).collect();
    let methods: Vec<Method> = normalized.iter().map(|(m, _)| *m).collect();
    let q = methods.len();
    if common.len() < n {
        out.notes.push(format!("{ds}/{model_name}: pairwise metrics over {} of {n} instances", common.len()));
    }
    let share = |a: usize, r: usize| &normalized[a].1[r].as_ref().expect("common").shares;
    let ranks: Vec<Vec<Vec<usize>>> =
        (0..q).map(|a| (0..n).map(|r| normalized[a].1[r].as_ref().map(|s| ranking(&s.shares)).unwrap_or_default()).collect()).collect();

    let mut dist = vec![0.0; q * q];
    for a in 0..q {
        for b in 0..q {
            let d = common.iter().map(|&r| consistency(share(a, r), share(b, r))).collect::<Result<Vec<_>>>()?;
            dist[a * q + b] = if d.is_empty() { 0.0 } else { d.iter().sum::<f64>() / d.len() as f64 };
        }
    }
    if q > 1 {
        for a in 0..q {
            let per_instance = common
                .iter()
                .map(|&r| {
                    let mut total = 0.0;
                    for b in (0..q).filter(|&b| b != a) {
                        total += consistency(share(a, r), share(b, r))?;
                    }
                    Ok(total / (q - 1) as f64)
                })
                .collect::<Result<Vec<_>>>()?;
            out.report.record(ds, model_name, methods[a].name(), names::CONSISTENCY, &per_instance)?;
        }
        out.pairwise.push(pairwise((ds, model_name), PairwiseKind::Consistency, None, &methods, &dist));
    }

    let mut ks: BTreeSet<usize> = params.agreement_k.iter().map(|&k| k.min(m)).filter(|&k| k > 0).collect();
    if ks.is_empty() {
        ks.insert(m);
    }
    if !common.is_empty() {
        for k in ks {
            let mut fa = vec![0.0; q * q];
            let mut ra = vec![0.0; q * q];
            for a in 0..q {
                for b in 0..q {
                    let (mut sf, mut sr) = (0.0, 0.0);
                    for &r in &common {
                        sf += feature_agreement(&ranks[a][r], &ranks[b][r], k)?;
                        sr += rank_agreement(&ranks[a][r], &ranks[b][r], k)?;
                    }
                    fa[a * q + b] = sf / common.len() as f64;
                    ra[a * q + b] = sr / common.len() as f64;
                }
            }
            out.pairwise.push(pairwise((ds, model_name), PairwiseKind::FeatureAgreement, Some(k), &methods, &fa));
            out.pairwise.push(pairwise((ds, model_name), PairwiseKind::RankAgreement, Some(k), &methods, &ra));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureKind;
    use crate::model::FnModel;

    #[test]
    fn identical_methods_have_zero_consistency() {
        let f = FnModel::new(2, |x: &[f64]| if x[0] > 0.0 { 0.9 } else { 0.1 });
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 - 15.0) / 5.0, (i % 7) as f64]).collect();
        let points = Matrix::from_rows(&rows).unwrap();
        let ids: Vec<usize> = (100..130).collect();
        let make = |method| {
            ids.iter().map(|&id| Attribution::new(id, method, vec![0.4, 0.0], 0.5, 0.9)).collect::<Vec<_>>()
        };
        let atts = vec![(Method::Kshap, make(Method::Kshap)), (Method::Exact, make(Method::Exact))];
        let stats = FeatureStats::from_matrix(&points, &[FeatureKind::Continuous; 2]);
        let names = vec!["a".to_string(), "b".to_string()];
        let input = CellInput {
            dataset: "d",
            model_name: "DT",
            model: &f,
            feature_names: &names,
            points: &points,
            instance_ids: &ids,
            attributions: &atts,
            means: &[0.0, 0.0],
            stats: &stats,
            ground_truth: Some(&[1.0, 0.0]),
        };
        let out = evaluate_cell(&input, &MetricParams::default()).unwrap();
        let r = &out.report;
        assert_eq!(r.mean("d", "DT", "Kshap", names::CONSISTENCY), Some(0.0));
        assert_eq!(r.mean("d", "DT", "Kshap", names::GROUND_TRUTH_DISTANCE), Some(0.0));
        assert_eq!(r.mean("d", "DT", "Exact", names::STABILITY), Some(0.0));
        assert_eq!(r.mean("d", "DT", "Kshap", names::FEATURES_FOR_THRESHOLD), Some(1.0));
        assert_eq!(out.shares.len(), 2 * 30 * 2);
        let fa = out.pairwise.iter().find(|p| p.kind == PairwiseKind::FeatureAgreement && p.k == Some(2)).unwrap();
        assert_eq!(fa.values, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        // k values above M collapse onto M
        assert_eq!(out.pairwise.iter().filter(|p| p.kind == PairwiseKind::RankAgreement).count(), 2);
    }
}
