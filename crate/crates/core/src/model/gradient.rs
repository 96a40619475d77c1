use super::forward::{predict_from_logits, trace, Trace};
use super::{Model, ModelError};
use crate::numerics::{AccumulationStrategy, Tensor};

/// Gradient of `probs[top1] - probs[top2]` with respect to `x`.
///
/// The two classes are fixed by the prediction `strategy` produces at `x`.
/// The forward pass uses `strategy`; every backward reduction is sequential.
pub fn input_gradient(model: &Model, x: &Tensor, strategy: AccumulationStrategy) -> Result<Tensor, ModelError> {
    let t = trace(model, x, strategy)?;
    let pred = predict_from_logits(t.logits(), strategy, model.layers().len())?;
    let (top, second) = match pred.runner_up() {
        Some(r) => (pred.label, r),
        None => return Ok(Tensor::zeros(x.shape().to_vec())),
    };
    let p = &pred.probs;
    let margin = p[top] - p[second];
    // d(p_top - p_second)/dz_j = [j==top] p_top - [j==second] p_second - p_j * margin
    let upstream: Vec<f32> = p
        .iter()
        .enumerate()
        .map(|(j, &pj)| {
            let mut g = -pj * margin;
            if j == top {
                g += p[top];
            }
            if j == second {
                g -= p[second];
            }
            g
        })
        .collect();
    let grad = backprop(model, &t, upstream);
    Ok(Tensor::new(x.shape().to_vec(), grad).expect("input shape"))
}

/// Pull `upstream` (gradient w.r.t. the logits) back to the input.
pub(crate) fn backprop(model: &Model, t: &Trace, upstream: Vec<f32>) -> Vec<f32> {
    let mut g = upstream;
    for (k, layer) in model.layers().iter().enumerate().rev() {
        let local: Vec<f32> = g
            .iter()
            .zip(&t.pre[k])
            .map(|(&gi, &zi)| gi * layer.activation.derivative(zi))
            .collect();
        g = transpose_matvec(&layer.weights, &local);
    }
    g
}

/// `W^T · v` with sequential accumulation over rows.
pub(crate) fn transpose_matvec(w: &Tensor, v: &[f32]) -> Vec<f32> {
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    let data = w.data();
    let mut column = vec![0.0f32; rows];
    (0..cols)
        .map(|c| {
            for r in 0..rows {
                column[r] = data[r * cols + c] * v[r];
            }
            AccumulationStrategy::Sequential.reduce(&column)
        })
        .collect()
}
