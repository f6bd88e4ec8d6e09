use serde::{Deserialize, Serialize};

use super::{fit_forest, fit_tree, ForestModel, ForestParams, TreeModel, TreeParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Hyperparameters of either model family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Tree(TreeParams),
    Forest(ForestParams),
}

impl ModelSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::Tree(_) => "DT",
            ModelSpec::Forest(_) => "RF",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel<T> {
    Tree(TreeModel<T>),
    Forest(ForestModel<T>),
}

impl<T: Scalar> Model<T> for TrainedModel<T> {
    fn n_features(&self) -> usize {
        match self {
            TrainedModel::Tree(t) => t.n_features(),
            TrainedModel::Forest(f) => f.n_features(),
        }
    }

    fn predict(&self, x: &[T]) -> T {
        match self {
            TrainedModel::Tree(t) => t.predict(x),
            TrainedModel::Forest(f) => f.predict(x),
        }
    }

    fn trees(&self) -> Option<&[TreeModel<T>]> {
        match self {
            TrainedModel::Tree(t) => t.trees(),
            TrainedModel::Forest(f) => f.trees(),
        }
    }
}

pub fn fit_model<T: Scalar>(ds: &Dataset<T>, spec: &ModelSpec, seed: u64) -> Result<TrainedModel<T>> {
    Ok(match spec {
        ModelSpec::Tree(p) => TrainedModel::Tree(fit_tree(ds, p, seed)?),
        ModelSpec::Forest(p) => TrainedModel::Forest(fit_forest(ds, p, seed)?),
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile<T> {
    version: u32,
    #[serde(default)]
    metadata: serde_json::Map<String, serde_json::Value>,
    model: TrainedModel<T>,
}

impl<T: Scalar> TrainedModel<T> {
    /// Versioned JSON document with node lists and ids.
    pub fn to_json(&self, metadata: serde_json::Map<String, serde_json::Value>) -> Result<String> {
        let file = ModelFile { version: MODEL_FORMAT_VERSION, metadata, model: self.clone() };
        serde_json::to_string_pretty(&file).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<(Self, serde_json::Map<String, serde_json::Value>)> {
        let file: ModelFile<T> = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported model version {}", file.version)));
        }
        // re-validate node arenas that came from outside
        match &file.model {
            TrainedModel::Tree(t) => {
                TreeModel::from_nodes(t.nodes().to_vec(), t.n_features(), t.max_depth())?;
            }
            TrainedModel::Forest(f) => {
                for t in f.trees().unwrap_or_default() {
                    TreeModel::from_nodes(t.nodes().to_vec(), t.n_features(), t.max_depth())?;
                }
            }
        }
        Ok((file.model, file.metadata))
    }
}
