use std::fs;
use std::path::{Path, PathBuf};

use crate::numerics::Tensor;

use super::MetricsError;

pub const DEFAULT_AMPLIFICATION: f32 = 50.0;

/// Map `[0,1]` to 8 bits, rounding half up. Out-of-range values saturate.
pub fn quantize(v: f32) -> u8 {
    let v = (v as f64).clamp(0.0, 1.0);
    (v * 255.0 + 0.5).floor() as u8
}

/// Write a 2-D `[height, width]` tensor as a binary PGM.
pub fn write_pgm(image: &Tensor, path: impl AsRef<Path>) -> Result<(), MetricsError> {
    let &[h, w] = image.shape() else {
        return Err(MetricsError::NotGrayscale(image.shape().to_vec()));
    };
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(image.data().iter().map(|&v| quantize(v)));
    fs::write(path, bytes)?;
    Ok(())
}

/// Write `<stem>_original.pgm` and `<stem>_amplified.pgm`, where the second
/// shows `original + amplification * (boundary - original)`.
pub fn export_visualization(
    original: &Tensor,
    boundary: &Tensor,
    amplification: f32,
    stem: impl AsRef<Path>,
) -> Result<(PathBuf, PathBuf), MetricsError> {
    if original.shape() != boundary.shape() {
        return Err(MetricsError::ShapeMismatch {
            left: original.shape().to_vec(),
            right: boundary.shape().to_vec(),
        });
    }
    if original.rank() != 2 {
        return Err(MetricsError::NotGrayscale(original.shape().to_vec()));
    }
    let amplified: Vec<f32> = original
        .data()
        .iter()
        .zip(boundary.data())
        .map(|(&o, &b)| (o as f64 + amplification as f64 * (b as f64 - o as f64)).clamp(0.0, 1.0) as f32)
        .collect();
    let amplified = Tensor::new(original.shape().to_vec(), amplified).expect("same shape");

    let stem = stem.as_ref();
    let with_suffix = |suffix: &str| {
        let mut name = stem.file_name().unwrap_or_default().to_os_string();
        name.push(suffix);
        stem.with_file_name(name)
    };
    let (a, b) = (with_suffix("_original.pgm"), with_suffix("_amplified.pgm"));
    write_pgm(original, &a)?;
    write_pgm(&amplified, &b)?;
    Ok((a, b))
}
