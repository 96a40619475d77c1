//! Dense feed-forward classifier with strategy-parameterized inference.

mod forward;
mod gradient;
mod io;
mod train;

pub use forward::{forward, logits, softmax, softmax_with, Prediction};
pub use gradient::input_gradient;
pub use io::{load_model, read_model, save_model, write_model, ModelFileError, MODEL_MAGIC, MODEL_VERSION};
pub use train::{cross_entropy, train_toy, TrainStats};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{NumericsError, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("input has {found} elements, model expects {expected}")]
    InputShape { expected: usize, found: usize },
    #[error("non-finite value in layer {layer}")]
    NonFinite { layer: usize },
    #[error("layer {layer} takes {expected} inputs but the previous layer produces {found}")]
    Chain {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("model must have at least one layer")]
    NoLayers,
    #[error("model must produce at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("layer {layer}: {reason}")]
    InvalidLayer { layer: usize, reason: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub(crate) fn apply(self, v: f32) -> f32 {
        match self {
            Activation::Identity => v,
            Activation::Relu => {
                if v > 0.0 {
                    v
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn derivative(self, pre: f32) -> f32 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn to_byte(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// `activation(weights · x + bias)`; weights are `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Tensor, bias: Tensor, activation: Activation) -> Result<Self, ModelError> {
        let layer = Self {
            weights,
            bias,
            activation,
        };
        layer.check(0)?;
        Ok(layer)
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    fn check(&self, index: usize) -> Result<(), ModelError> {
        let invalid = |reason: String| ModelError::InvalidLayer {
            layer: index,
            reason,
        };
        if self.weights.rank() != 2 {
            return Err(invalid(format!("weights must be rank 2, got {:?}", self.weights.shape())));
        }
        if self.bias.rank() != 1 || self.bias.len() != self.weights.shape()[0] {
            return Err(invalid(format!(
                "bias shape {:?} does not match {} rows",
                self.bias.shape(),
                self.weights.shape()[0]
            )));
        }
        if self.out_dim() == 0 || self.in_dim() == 0 {
            return Err(invalid("zero-sized layer".into()));
        }
        if !self.weights.is_finite() || !self.bias.is_finite() {
            return Err(ModelError::NonFinite { layer: index });
        }
        Ok(())
    }

    /// bit-level equality of all parameters
    pub fn bit_eq(&self, other: &Layer) -> bool {
        self.activation == other.activation
            && self.weights.bit_eq(&other.weights)
            && self.bias.bit_eq(&other.bias)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    layers: Vec<Layer>,
}

impl Model {
    pub fn new(layers: Vec<Layer>) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::NoLayers);
        }
        for (i, layer) in layers.iter().enumerate() {
            layer.check(i)?;
            if i > 0 && layers[i - 1].out_dim() != layer.in_dim() {
                return Err(ModelError::Chain {
                    layer: i,
                    expected: layer.in_dim(),
                    found: layers[i - 1].out_dim(),
                });
            }
        }
        let classes = layers.last().map(Layer::out_dim).unwrap_or(0);
        if classes < 2 {
            return Err(ModelError::TooFewClasses(classes));
        }
        Ok(Self { layers })
    }

    /// He-uniform initialized network. `dims` lists the input size, hidden
    /// sizes and class count; hidden layers use ReLU, the last is linear.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self, ModelError> {
        if dims.len() < 2 {
            return Err(ModelError::NoLayers);
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / fan_in.max(1) as f32).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            let activation = if i + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(Layer {
                weights: Tensor::new(vec![fan_out, fan_in], w)?,
                bias: Tensor::zeros(vec![fan_out]),
                activation,
            });
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn bit_eq(&self, other: &Model) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.bit_eq(b))
    }

    pub(crate) fn check_input(&self, x: &Tensor) -> Result<(), ModelError> {
        if x.len() != self.input_len() {
            return Err(ModelError::InputShape {
                expected: self.input_len(),
                found: x.len(),
            });
        }
        if !x.is_finite() {
            return Err(ModelError::NonFinite { layer: 0 });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_broken_chains() {
        let a = Layer::new(Tensor::zeros(vec![3, 2]), Tensor::zeros(vec![3]), Activation::Relu).unwrap();
        let b = Layer::new(Tensor::zeros(vec![2, 4]), Tensor::zeros(vec![2]), Activation::Identity).unwrap();
        assert!(matches!(
            Model::new(vec![a, b]),
            Err(ModelError::Chain { layer: 1, expected: 4, found: 3 })
        ));
    }

    #[test]
    fn rejects_single_class_and_empty() {
        let a = Layer::new(Tensor::zeros(vec![1, 2]), Tensor::zeros(vec![1]), Activation::Identity).unwrap();
        assert_eq!(Model::new(vec![a]), Err(ModelError::TooFewClasses(1)));
        assert_eq!(Model::new(vec![]), Err(ModelError::NoLayers));
    }

    #[test]
    fn rejects_non_finite_weights() {
        let w = Tensor::new(vec![2, 1], vec![1.0, f32::NAN]).unwrap();
        assert!(Layer::new(w, Tensor::zeros(vec![2]), Activation::Identity).is_err());
    }

    #[test]
    fn random_model_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = Model::random(&[8, 4, 3], &mut rng).unwrap();
        assert_eq!(m.input_len(), 8);
        assert_eq!(m.num_classes(), 3);
        assert_eq!(m.layers()[0].activation, Activation::Relu);
        assert_eq!(m.layers()[1].activation, Activation::Identity);
    }
}
