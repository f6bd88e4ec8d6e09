//! Dataset representation, CSV ingestion, encoding and resampling.

mod csv_io;
mod dataset;
mod encode;
mod matrix;
mod split;

pub use csv_io::{load_csv, read_csv, ColumnRole, DatasetSchema, RawDataset, MISSING_SENTINELS};
pub use dataset::{Dataset, FeatureKind, FeatureStats};
pub use encode::{encode, CategoryOrder, CategoryTable, ColumnEncoder, Encoder, EncodingPolicy};
pub use matrix::Matrix;
pub use split::{kfold, split, split_stratified, SplitIndices};
