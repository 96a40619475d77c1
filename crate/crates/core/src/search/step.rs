use crate::model::Prediction;
use crate::numerics::{axpy, sign_map, Tensor};

use super::SearchError;

/// `+1` when the prediction disagrees with the reference label, `-1` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectnessSign {
    Correct,
    Misclassified,
}

impl CorrectnessSign {
    pub fn value(self) -> f32 {
        match self {
            CorrectnessSign::Correct => -1.0,
            CorrectnessSign::Misclassified => 1.0,
        }
    }
}

pub fn correctness_sign(prediction: &Prediction, true_label: usize) -> CorrectnessSign {
    if prediction.label != true_label {
        CorrectnessSign::Misclassified
    } else {
        CorrectnessSign::Correct
    }
}

/// `x + c * dconf * alpha * sign(grad)`, then clamped when a range is given.
pub fn fgsm_step(
    x: &Tensor,
    c: CorrectnessSign,
    dconf: f32,
    alpha: f32,
    grad: &Tensor,
    clamp_range: Option<(f32, f32)>,
) -> Result<Tensor, SearchError> {
    if x.shape() != grad.shape() {
        return Err(SearchError::Numerics(crate::numerics::NumericsError::ShapeMismatch {
            expected: x.shape().to_vec(),
            found: grad.shape().to_vec(),
        }));
    }
    if dconf == 0.0 {
        return Ok(x.clone());
    }
    let scale = c.value() * dconf * alpha;
    let mut next = axpy(x, scale, &sign_map(grad))?;
    if let Some((lo, hi)) = clamp_range {
        next.clamp_in_place(lo, hi);
    }
    Ok(next)
}

/// Gradient of `p[reference] - p[best other]` from an oracle gradient of
/// `p[top1] - p[top2]`.
///
/// When the prediction already is the reference label the two scalars are the
/// same. Otherwise the reference class is taken to be the runner-up (always
/// true for two classes), which makes the margin the negated confidence gap.
pub fn reference_margin_gradient(grad: &Tensor, prediction: &Prediction, reference: usize) -> Tensor {
    if prediction.label == reference {
        grad.clone()
    } else {
        let data = grad.data().iter().map(|&g| -g).collect();
        Tensor::new(grad.shape().to_vec(), data).expect("same shape")
    }
}
