//! Evaluation of attributions: normalisation, consistency, agreement,
//! stability and compactness, aggregated into a keyed report.

mod agreement;
mod compactness;
mod evaluate;
mod normalize;
mod report;
mod stability;

pub use agreement::{consistency, feature_agreement, rank_agreement, ranking};
pub use compactness::{compactness, summarize_compactness, CompactnessCurve, CompactnessSummary};
pub use evaluate::{evaluate_cell, names, CellInput, CellOutput, MetricParams, PairwiseKind, PairwiseMatrix, ShareSample};
pub use normalize::{normalize, normalize_values, NormalizedAttribution};
pub use report::{aggregate, Aggregate, MetricEntry, MetricKey, MetricReport};
pub use stability::{stability, StabilityValue};
