use rand::seq::index::sample;

use crate::error::Result;
use crate::matrix::DenseMatrix;
use crate::nn::mlp::MlpModel;
use crate::rng::RngStream;

/// Maps logits to `(loss, dloss/dlogits)`.
pub type LossFn<'a> = dyn Fn(&DenseMatrix) -> Result<(f64, DenseMatrix)> + 'a;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Relative error `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error between analytic and central-difference gradients
/// over at most `max_samples` randomly chosen parameters, evaluated with
/// dropout off. Samples whose perturbation flips any ReLU are skipped since
/// the loss is not differentiable across the kink.
pub fn grad_check(
    model: &MlpModel,
    x: &DenseMatrix,
    loss: &LossFn<'_>,
    max_samples: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let mut eval_rng = RngStream::new(0);
    let (logits, cache) = model.forward(x, false, &mut eval_rng)?;
    let (_, dlogits) = loss(&logits)?;
    let grads = model.backprop(&cache, &dlogits)?;
    let pattern = cache.relu_pattern();
    let flat: Vec<f64> = grads.into_iter().flatten().collect();

    let total = model.num_params();
    let picks = sample(rng, total, max_samples.min(total));
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for idx in picks.iter() {
        let orig = read_param(model, idx);
        let mut eval_at = |v: f64| -> Result<(f64, Vec<bool>)> {
            write_param(&mut probe, idx, v);
            let (lg, c) = probe.forward(x, false, &mut eval_rng)?;
            Ok((loss(&lg)?.0, c.relu_pattern()))
        };
        let (lp, pp) = eval_at(orig + FD_STEP)?;
        let (lm, pm) = eval_at(orig - FD_STEP)?;
        write_param(&mut probe, idx, orig);
        if pp != pattern || pm != pattern {
            continue;
        }
        let numeric = (lp - lm) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(flat[idx], numeric));
    }
    Ok(worst)
}

fn locate(model: &MlpModel, mut idx: usize) -> (usize, usize) {
    for (k, s) in model.param_slices().iter().enumerate() {
        if idx < s.len() {
            return (k, idx);
        }
        idx -= s.len();
    }
    unreachable!("parameter index out of range")
}

fn read_param(model: &MlpModel, idx: usize) -> f64 {
    let (k, i) = locate(model, idx);
    model.param_slices()[k][i]
}

fn write_param(model: &mut MlpModel, idx: usize, v: f64) {
    let (k, i) = locate(model, idx);
    model.param_slices_mut()[k][i] = v;
}
