use std::collections::BTreeSet;

use rand::Rng as _;

use crate::corpus::BOS;
use crate::error::Result;
use crate::generator::model::{example_loss, loss_and_gradient, GradientFault, TrainingExample};
use crate::generator::params::{Seq2SeqParams, TENSOR_NAMES};
use crate::rng;

/// Denominator floor of the relative error, so coordinates whose true
/// gradient is essentially zero are judged on absolute error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Tensor and flat index of the worst coordinate.
    pub worst: (&'static str, usize),
    pub coordinates: usize,
    pub tensors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GradCheckOutcome {
    Checked(GradCheckReport),
    Skipped(String),
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Flat indices in tensor `t` worth probing. Embedding rows of tokens absent
/// from the pair have identically zero gradient, so only used rows are sampled.
fn candidate_indices(params: &Seq2SeqParams<f64>, ex: &TrainingExample, t: usize) -> Vec<usize> {
    let tensor = params.tensors()[t];
    let rows: Option<BTreeSet<u32>> = match TENSOR_NAMES[t] {
        "src_embed" => Some(ex.source.iter().copied().collect()),
        "tgt_embed" => Some(std::iter::once(BOS).chain(ex.target.iter().copied()).collect()),
        _ => None,
    };
    match rows {
        Some(rows) => rows.into_iter().flat_map(|r| (0..tensor.cols).map(move |c| r as usize * tensor.cols + c)).collect(),
        None => (0..tensor.data.len()).collect(),
    }
}

/// Compares the analytic gradient of the pair's loss with central finite
/// differences on `coordinates` sampled coordinates spread over every tensor.
pub fn gradient_check(
    params: &Seq2SeqParams<f64>,
    ex: &TrainingExample,
    epsilon: f64,
    coordinates: usize,
    seed: u64,
    fault: Option<GradientFault>,
) -> Result<GradCheckOutcome> {
    if ex.target.is_empty() {
        return Ok(GradCheckOutcome::Skipped("zero-length target".into()));
    }
    let mut grad = Seq2SeqParams::zeros(params.dims);
    loss_and_gradient(params, ex, &mut grad, 1.0, fault)?;

    let n_tensors = TENSOR_NAMES.len();
    let per_tensor = coordinates.div_ceil(n_tensors).max(1);
    let mut rng = rng::seeded(seed);
    let mut probe = params.clone();
    let mut worst = (0.0, (TENSOR_NAMES[0], 0));
    let mut checked = 0;
    for (t, &name) in TENSOR_NAMES.iter().enumerate() {
        let pool = candidate_indices(params, ex, t);
        for _ in 0..per_tensor {
            let i = pool[rng.random_range(0..pool.len())];
            let original = params.tensors()[t].data[i];
            probe.tensors_mut()[t].data[i] = original + epsilon;
            let plus = example_loss(&probe, ex)?;
            probe.tensors_mut()[t].data[i] = original - epsilon;
            let minus = example_loss(&probe, ex)?;
            probe.tensors_mut()[t].data[i] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let err = relative_error(grad.tensors()[t].data[i], numeric);
            if err > worst.0 || checked == 0 {
                worst = (err, (name, i));
            }
            checked += 1;
        }
    }
    Ok(GradCheckOutcome::Checked(GradCheckReport {
        max_relative_error: worst.0,
        worst: worst.1,
        coordinates: checked,
        tensors: n_tensors,
    }))
}
