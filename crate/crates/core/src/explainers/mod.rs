//! Local attribution methods behind one interface, the brute-force Shapley
//! reference, and the shared regression kernel.

mod attribution;
mod background;
mod batch;
mod exact;
mod interpreter;
mod kernel;
mod lime;
pub mod oracle;
mod ridge;
mod sampling;
mod surrogate;
mod tree_shap;
pub mod value;

pub use attribution::{Attribution, AttributionFlags, ExplainerConfig, Method, OutputScale};
pub use background::{Background, BackgroundOrigin};
pub use batch::{explain, explain_batch, BatchFailure, BatchResult, ExplainContext};
pub use exact::{exact_shapley, MAX_EXACT_FEATURES};
pub use interpreter::tree_interpreter;
pub use kernel::{kernel_shap, MAX_KERNEL_FEATURES};
pub use lime::lime;
pub use ridge::{weighted_ridge, RidgeSolution, RESCUE_LAMBDA};
pub use sampling::{sampling_shap, MAX_EXHAUSTIVE_FEATURES};
pub use surrogate::local_surrogate;
pub use tree_shap::tree_shap;
