//! CART trees, random forests, impurity importance and grid search.

mod forest;
mod importance;
mod search;
mod trained;
mod tree;

pub use forest::{fit_forest, ForestModel, ForestParams};
pub use importance::{gini_importance, raw_gini_importance};
pub use search::{grid_search, GridSearchResult};
pub use trained::{fit_model, ModelSpec, TrainedModel, MODEL_FORMAT_VERSION};
pub use tree::{fit_tree, gini, Node, Split, TreeModel, TreeParams};
