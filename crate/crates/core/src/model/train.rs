use serde::{Deserialize, Serialize};

use super::forward::{softmax, top_two, trace};
use super::gradient::transpose_matvec;
use super::{Model, ModelError};
use crate::data::LabeledSample;
use crate::numerics::AccumulationStrategy;

const TRAIN_STRATEGY: AccumulationStrategy = AccumulationStrategy::Sequential;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub accuracy: f64,
}

/// Mean cross-entropy and accuracy of `model` on `data`.
pub fn cross_entropy(model: &Model, data: &[LabeledSample]) -> Result<(f64, f64), ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut loss = 0.0f64;
    let mut correct = 0usize;
    for s in data {
        check_label(model, s)?;
        let t = trace(model, &s.input, TRAIN_STRATEGY)?;
        let p = softmax(t.logits());
        loss -= (p[s.label].max(f32::MIN_POSITIVE) as f64).ln();
        if top_two(&p).0 == s.label {
            correct += 1;
        }
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

fn check_label(model: &Model, s: &LabeledSample) -> Result<(), ModelError> {
    if s.label >= model.num_classes() {
        return Err(ModelError::LabelOutOfRange {
            label: s.label,
            num_classes: model.num_classes(),
        });
    }
    Ok(())
}

/// Full-batch gradient descent on mean cross-entropy.
pub fn train_toy(
    model: &Model,
    data: &[LabeledSample],
    epochs: usize,
    learning_rate: f32,
) -> Result<(Model, TrainStats), ModelError> {
    let (initial_loss, _) = cross_entropy(model, data)?;
    let mut current = model.clone();
    if learning_rate != 0.0 {
        for _ in 0..epochs {
            gd_step(&mut current, data, learning_rate)?;
        }
    }
    let (final_loss, accuracy) = cross_entropy(&current, data)?;
    Ok((
        current,
        TrainStats {
            epochs,
            initial_loss,
            final_loss,
            accuracy,
        },
    ))
}

fn gd_step(model: &mut Model, data: &[LabeledSample], lr: f32) -> Result<(), ModelError> {
    let mut grad_w: Vec<Vec<f32>> = model.layers().iter().map(|l| vec![0.0; l.weights.len()]).collect();
    let mut grad_b: Vec<Vec<f32>> = model.layers().iter().map(|l| vec![0.0; l.bias.len()]).collect();

    for s in data {
        check_label(model, s)?;
        let t = trace(model, &s.input, TRAIN_STRATEGY)?;
        let mut g = softmax(t.logits());
        g[s.label] -= 1.0;
        for (k, layer) in model.layers().iter().enumerate().rev() {
            let local: Vec<f32> = g
                .iter()
                .zip(&t.pre[k])
                .map(|(&gi, &zi)| gi * layer.activation.derivative(zi))
                .collect();
            let input = &t.inputs[k];
            let cols = layer.in_dim();
            for (r, &lr_) in local.iter().enumerate() {
                grad_b[k][r] += lr_;
                let row = &mut grad_w[k][r * cols..(r + 1) * cols];
                for (gw, &a) in row.iter_mut().zip(input) {
                    *gw += lr_ * a;
                }
            }
            if k > 0 {
                g = transpose_matvec(&layer.weights, &local);
            }
        }
    }

    let scale = lr / data.len() as f32;
    for (k, layer) in model.layers_mut().iter_mut().enumerate() {
        for (w, g) in layer.weights.data_mut().iter_mut().zip(&grad_w[k]) {
            *w -= scale * g;
        }
        for (b, g) in layer.bias.data_mut().iter_mut().zip(&grad_b[k]) {
            *b -= scale * g;
        }
    }
    for (k, layer) in model.layers().iter().enumerate() {
        if !layer.weights.is_finite() || !layer.bias.is_finite() {
            return Err(ModelError::NonFinite { layer: k });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::two_blobs;
    use crate::model::{Activation, Layer};
    use crate::numerics::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(x: Vec<f32>, label: usize) -> LabeledSample {
        LabeledSample {
            input: Tensor::vector(x),
            label,
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Model::random(&[2, 4, 2], &mut rng).unwrap();
        let data = two_blobs(20, 11);
        let (trained, _) = train_toy(&m, &data, 5, 0.0).unwrap();
        assert!(trained.bit_eq(&m));
    }

    #[test]
    fn single_step_matches_hand_computation() {
        let w0 = [0.2f32, -0.4, 0.1, 0.3];
        let b0 = [0.05f32, -0.05];
        let layer = Layer::new(
            Tensor::new(vec![2, 2], w0.to_vec()).unwrap(),
            Tensor::vector(b0.to_vec()),
            Activation::Identity,
        )
        .unwrap();
        let m = Model::new(vec![layer]).unwrap();
        let x = [0.7f64, -1.3];
        let data = [sample(vec![x[0] as f32, x[1] as f32], 1)];
        let lr = 0.5f64;
        let (trained, _) = train_toy(&m, &data, 1, lr as f32).unwrap();

        // reference in f64: W' = W - lr (p - y) x^T, b' = b - lr (p - y)
        let z: Vec<f64> = (0..2)
            .map(|r| w0[2 * r] as f64 * x[0] + w0[2 * r + 1] as f64 * x[1] + b0[r] as f64)
            .collect();
        let zmax = z[0].max(z[1]);
        let e: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
        let p: Vec<f64> = e.iter().map(|v| v / (e[0] + e[1])).collect();
        let d = [p[0], p[1] - 1.0];
        let l = &trained.layers()[0];
        for r in 0..2 {
            for c in 0..2 {
                let expected = w0[2 * r + c] as f64 - lr * d[r] * x[c];
                assert!((l.weights.data()[2 * r + c] as f64 - expected).abs() < 1e-6);
            }
            let expected = b0[r] as f64 - lr * d[r];
            assert!((l.bias.data()[r] as f64 - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn separates_two_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = Model::random(&[2, 8, 2], &mut rng).unwrap();
        let data = two_blobs(200, 9);
        let (_, stats) = train_toy(&m, &data, 200, 0.1).unwrap();
        assert!(stats.accuracy >= 0.95, "{stats:?}");
        assert!(stats.final_loss <= stats.initial_loss);
    }

    #[test]
    fn rejects_empty_and_bad_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Model::random(&[2, 2], &mut rng).unwrap();
        assert_eq!(train_toy(&m, &[], 1, 0.1).unwrap_err(), ModelError::EmptyDataset);
        let bad = [sample(vec![0.0, 0.0], 2)];
        assert!(matches!(train_toy(&m, &bad, 1, 0.1), Err(ModelError::LabelOutOfRange { .. })));
    }
}
