use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::value::LogOddsModel;
use super::{
    exact_shapley, kernel_shap, lime, local_surrogate, sampling_shap, tree_interpreter, tree_shap, Attribution,
    Background, ExplainerConfig, Method, OutputScale,
};
use crate::data::{FeatureStats, Matrix};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::seed;

/// Everything an explainer may need besides the model and the instance.
#[derive(Clone, Copy)]
pub struct ExplainContext<'a, T> {
    pub background: &'a Background<T>,
    pub stats: &'a FeatureStats<T>,
    pub training: &'a Matrix<T>,
    pub config: &'a ExplainerConfig,
}

fn method_stream(method: Method) -> u64 {
    Method::ALL.iter().chain([Method::Exact].iter()).position(|&m| m == method).expect("listed") as u64
}

fn dispatch<T: Scalar, M: Model<T> + ?Sized>(
    method: Method,
    model: &M,
    x: &[T],
    instance_id: usize,
    ctx: &ExplainContext<'_, T>,
) -> Result<Attribution<T>> {
    let mut rng = seed::rng_at(ctx.config.seed, &[method_stream(method), instance_id as u64]);
    match method {
        Method::Exact => exact_shapley(model, x, ctx.background, instance_id),
        Method::Kshap => kernel_shap(model, x, ctx.background, ctx.config, &mut rng, instance_id),
        Method::Sshap => sampling_shap(model, x, ctx.background, ctx.config, &mut rng, instance_id),
        Method::Tshap => tree_shap(model, x, ctx.background, instance_id),
        Method::Ti => tree_interpreter(model, x, instance_id),
        Method::Lime => lime(model, x, ctx.stats, ctx.config, &mut rng, instance_id),
        Method::LSurro => local_surrogate(model, x, ctx.training, ctx.stats, ctx.config, instance_id),
    }
}

/// Explains a single instance. The random stream depends only on the
/// configured seed, the method and `instance_id`.
pub fn explain<T: Scalar, M: Model<T> + ?Sized>(
    method: Method,
    model: &M,
    x: &[T],
    instance_id: usize,
    ctx: &ExplainContext<'_, T>,
) -> Result<Attribution<T>> {
    match ctx.config.output {
        OutputScale::Probability => dispatch(method, model, x, instance_id, ctx),
        OutputScale::LogOdds if matches!(method, Method::Tshap | Method::Ti) => Err(Error::InvalidArgument(format!(
            "{method} explains tree leaf values and supports only the probability output"
        ))),
        OutputScale::LogOdds => dispatch(method, &LogOddsModel::new(model), x, instance_id, ctx),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub instance_id: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchResult<T> {
    pub attributions: Vec<Attribution<T>>,
    pub failures: Vec<BatchFailure>,
}

/// Explains every row of `instances`; row `i` is identified by
/// `instance_ids[i]`. Failures are collected, not fatal.
pub fn explain_batch<T: Scalar, M: Model<T> + ?Sized>(
    method: Method,
    model: &M,
    instances: &Matrix<T>,
    instance_ids: &[usize],
    ctx: &ExplainContext<'_, T>,
) -> Result<BatchResult<T>> {
    if instance_ids.len() != instances.nrows() {
        return Err(Error::Dimension { expected: instances.nrows(), got: instance_ids.len() });
    }
    ctx.config.validate()?;
    let results: Vec<Result<Attribution<T>>> = (0..instances.nrows())
        .into_par_iter()
        .map(|i| explain(method, model, instances.row(i), instance_ids[i], ctx))
        .collect();
    let mut attributions = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (r, &id) in results.into_iter().zip(instance_ids) {
        match r {
            Ok(a) => attributions.push(a),
            Err(e) => failures.push(BatchFailure { instance_id: id, message: e.to_string() }),
        }
    }
    Ok(BatchResult { attributions, failures })
}
