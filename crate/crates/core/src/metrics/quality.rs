use crate::numerics::Tensor;

use super::MetricsError;

fn check_shapes(a: &Tensor, b: &Tensor) -> Result<(), MetricsError> {
    if a.shape() != b.shape() {
        return Err(MetricsError::ShapeMismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Mean squared difference, accumulated in f64. Empty tensors give 0.
pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(total / a.len() as f64)
}

/// `10 log10(peak^2 / mse)` in dB for a known mse; `+inf` when it is zero.
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// Peak signal-to-noise ratio of `perturbed` against `original`.
pub fn psnr(original: &Tensor, perturbed: &Tensor, peak: f64) -> Result<f64, MetricsError> {
    if !(peak > 0.0) {
        return Err(MetricsError::InvalidPeak(peak));
    }
    Ok(psnr_from_mse(mse(original, perturbed)?, peak))
}
