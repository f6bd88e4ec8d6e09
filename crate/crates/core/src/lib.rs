//! Benchmarking local feature-attribution methods on tree models.
//!
//! The crate is generic over the floating-point type (`f32` or `f64`); the
//! aliases at the bottom fix it to one precision.

pub mod data;
pub mod error;
pub mod explainers;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod seed;
pub mod synthgen;
pub mod trees;

pub use error::{Error, Result};
pub use model::Model;
pub use scalar::Scalar;

pub type DatasetF64 = data::Dataset<f64>;
pub type DatasetF32 = data::Dataset<f32>;
pub type MatrixF64 = data::Matrix<f64>;
pub type MatrixF32 = data::Matrix<f32>;
pub type TreeModelF64 = trees::TreeModel<f64>;
pub type TreeModelF32 = trees::TreeModel<f32>;
pub type ForestModelF64 = trees::ForestModel<f64>;
pub type ForestModelF32 = trees::ForestModel<f32>;
pub type TrainedModelF64 = trees::TrainedModel<f64>;
pub type TrainedModelF32 = trees::TrainedModel<f32>;
pub type AttributionF64 = explainers::Attribution<f64>;
pub type AttributionF32 = explainers::Attribution<f32>;
pub type BackgroundF64 = explainers::Background<f64>;
pub type BackgroundF32 = explainers::Background<f32>;
