use serde::{Deserialize, Serialize};

use super::{Model, ModelError};
use crate::numerics::{matvec, AccumulationStrategy, Tensor};

/// Top-1 label, full probability vector, and the top-1/top-2 confidence gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    pub probs: Vec<f32>,
    pub dconf: f32,
}

impl Prediction {
    /// Label is the first index of the maximum; `dconf` is the gap to the best other class.
    pub fn from_probs(probs: Vec<f32>) -> Self {
        let (label, runner_up) = top_two(&probs);
        let dconf = match runner_up {
            Some(r) => probs[label] - probs[r],
            None => probs.first().copied().unwrap_or(0.0),
        };
        Self { label, probs, dconf }
    }

    /// Index of the second most probable class (lowest index on ties).
    pub fn runner_up(&self) -> Option<usize> {
        top_two(&self.probs).1
    }

    /// Same label and bit-identical `dconf`.
    pub fn same_as(&self, other: &Prediction) -> bool {
        self.label == other.label && self.dconf.to_bits() == other.dconf.to_bits()
    }
}

pub(crate) fn top_two(values: &[f32]) -> (usize, Option<usize>) {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    let mut second: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if i == best {
            continue;
        }
        match second {
            Some(s) if v <= values[s] => {}
            _ => second = Some(i),
        }
    }
    (best, second)
}

/// Numerically stable softmax with a sequential normalizer.
pub fn softmax(logits: &[f32]) -> Vec<f32> {
    softmax_with(logits, AccumulationStrategy::Sequential)
}

/// Max-subtracted softmax whose normalizing sum uses `strategy`.
pub fn softmax_with(logits: &[f32], strategy: AccumulationStrategy) -> Vec<f32> {
    if logits.is_empty() {
        return Vec::new();
    }
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total = strategy.reduce(&exps);
    exps.into_iter().map(|e| e / total).collect()
}

/// Intermediate values of one forward pass.
pub(crate) struct Trace {
    /// `inputs[k]` is the input of layer `k`; the last entry is the logits.
    pub inputs: Vec<Vec<f32>>,
    /// pre-activation of each layer
    pub pre: Vec<Vec<f32>>,
}

impl Trace {
    pub fn logits(&self) -> &[f32] {
        self.inputs.last().expect("non-empty trace")
    }
}

pub(crate) fn trace(model: &Model, x: &Tensor, strategy: AccumulationStrategy) -> Result<Trace, ModelError> {
    model.check_input(x)?;
    let mut inputs = Vec::with_capacity(model.layers().len() + 1);
    let mut pre = Vec::with_capacity(model.layers().len());
    let mut current = Tensor::vector(x.data().to_vec());
    for (k, layer) in model.layers().iter().enumerate() {
        let mut z = matvec(&layer.weights, &current, strategy)?.into_data();
        for (zi, bi) in z.iter_mut().zip(layer.bias.data()) {
            *zi += *bi;
        }
        let a: Vec<f32> = z.iter().map(|&v| layer.activation.apply(v)).collect();
        if a.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { layer: k });
        }
        inputs.push(current.into_data());
        pre.push(z);
        current = Tensor::vector(a);
    }
    inputs.push(current.into_data());
    Ok(Trace { inputs, pre })
}

pub fn logits(model: &Model, x: &Tensor, strategy: AccumulationStrategy) -> Result<Vec<f32>, ModelError> {
    Ok(trace(model, x, strategy)?.inputs.pop().expect("non-empty trace"))
}

/// Classify `x` with every reduction performed under `strategy`.
pub fn forward(model: &Model, x: &Tensor, strategy: AccumulationStrategy) -> Result<Prediction, ModelError> {
    let t = trace(model, x, strategy)?;
    predict_from_logits(t.logits(), strategy, model.layers().len())
}

pub(crate) fn predict_from_logits(
    logits: &[f32],
    strategy: AccumulationStrategy,
    layer_count: usize,
) -> Result<Prediction, ModelError> {
    let probs = softmax_with(logits, strategy);
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(ModelError::NonFinite { layer: layer_count });
    }
    Ok(Prediction::from_probs(probs))
}
