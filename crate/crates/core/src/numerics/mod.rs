//! Strategy-parameterized binary32 arithmetic.
//!
//! Every reduction goes through an [`AccumulationStrategy`], so a forward pass
//! run under two strategies sees the same real-valued arithmetic but different
//! rounding paths. Nothing here is parallel; results are bit-deterministic.

mod strategy;
mod tensor;

pub use strategy::{reduce_sum, AccumulationStrategy, DEFAULT_BLOCK_SIZE};
pub use tensor::{element_count, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("expected a rank-{expected} tensor, found rank {found}")]
    Rank { expected: usize, found: usize },
    #[error("tensor shape overflows the address space")]
    ShapeOverflow,
    #[error("unknown accumulation strategy {0:?} (valid: sequential, reversed, pairwise, kahan, blocked, blocked-<N>)")]
    UnknownStrategy(String),
    #[error("block size must be positive")]
    InvalidBlockSize,
}

/// Strategy-governed sum of elementwise products.
pub fn dot(a: &[f32], b: &[f32], strategy: AccumulationStrategy) -> Result<f32, NumericsError> {
    if a.len() != b.len() {
        return Err(NumericsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(dot_unchecked(a, b, strategy))
}

pub(crate) fn dot_unchecked(a: &[f32], b: &[f32], strategy: AccumulationStrategy) -> f32 {
    // products are rounded individually; no fused multiply-add
    let products: Vec<f32> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    strategy.reduce(&products)
}

/// `W · x` where `W` is rank 2 and `x` holds `cols(W)` elements.
///
/// `x` may have any shape as long as its element count matches; the output is rank 1.
pub fn matvec(w: &Tensor, x: &Tensor, strategy: AccumulationStrategy) -> Result<Tensor, NumericsError> {
    if w.rank() != 2 {
        return Err(NumericsError::Rank {
            expected: 2,
            found: w.rank(),
        });
    }
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    if cols != x.len() {
        return Err(NumericsError::ShapeMismatch {
            expected: vec![cols],
            found: x.shape().to_vec(),
        });
    }
    let out = (0..rows)
        .map(|r| dot_unchecked(w.row(r), x.data(), strategy))
        .collect();
    Ok(Tensor::vector(out))
}

/// Elementwise sign with `sign(0) = 0` (both zeros).
pub fn sign_map(t: &Tensor) -> Tensor {
    let data = t
        .data()
        .iter()
        .map(|&v| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    Tensor::new(t.shape().to_vec(), data).expect("shape preserved")
}

/// `x + s * g`, elementwise, one binary32 rounding per operation.
pub fn axpy(x: &Tensor, s: f32, g: &Tensor) -> Result<Tensor, NumericsError> {
    if x.shape() != g.shape() {
        return Err(NumericsError::ShapeMismatch {
            expected: x.shape().to_vec(),
            found: g.shape().to_vec(),
        });
    }
    if s == 0.0 {
        return Ok(x.clone());
    }
    let data = x.data().iter().zip(g.data()).map(|(&xi, &gi)| xi + s * gi).collect();
    Ok(Tensor::new(x.shape().to_vec(), data).expect("shape preserved"))
}
