//! Built-in synthetic datasets and the `.bsf` sample file.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::numerics::{element_count, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub input: Tensor,
    pub label: usize,
}

/// Side length of the procedurally generated shapes.
pub const SHAPE_SIDE: usize = 16;
pub const SHAPE_CLASSES: usize = 4;
pub const SHAPE_NAMES: [&str; SHAPE_CLASSES] = ["horizontal bar", "vertical bar", "box", "diagonal"];

/// Two 2-D Gaussian blobs centred at (-1, -1) and (1, 1), alternating labels.
pub fn two_blobs(n: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f32, 0.35).expect("valid sigma");
    (0..n)
        .map(|i| {
            let label = i % 2;
            let c = if label == 0 { -1.0 } else { 1.0 };
            let x = vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)];
            LabeledSample {
                input: Tensor::vector(x),
                label,
            }
        })
        .collect()
}

/// One square grayscale shape in `[0, 1]`; the class is drawn from the seed.
pub fn shape_sample(seed: u64) -> LabeledSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label = rng.random_range(0..SHAPE_CLASSES);
    render_shape(label, &mut rng)
}

/// `n` shapes with balanced classes, fully determined by `seed`.
pub fn shapes(n: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| render_shape(i % SHAPE_CLASSES, &mut rng)).collect()
}

fn render_shape<R: Rng>(label: usize, rng: &mut R) -> LabeledSample {
    let n = SHAPE_SIDE;
    let mut img = vec![0.0f32; n * n];
    for v in img.iter_mut() {
        *v = rng.random_range(0.02..0.2);
    }
    let ink = rng.random_range(0.6f32..0.95);
    let mut paint = |r: usize, c: usize, rng: &mut R| {
        img[r * n + c] = (ink + rng.random_range(-0.05f32..0.05)).clamp(0.0, 1.0);
    };
    match label {
        0 => {
            let r = rng.random_range(1..n - 1);
            let (c0, len) = (rng.random_range(0..3), rng.random_range(5..=n));
            for c in c0..(c0 + len).min(n) {
                paint(r, c, rng);
            }
        }
        1 => {
            let c = rng.random_range(1..n - 1);
            let (r0, len) = (rng.random_range(0..3), rng.random_range(5..=n));
            for r in r0..(r0 + len).min(n) {
                paint(r, c, rng);
            }
        }
        2 => {
            let size = rng.random_range(3..6);
            let (r0, c0) = (rng.random_range(0..n - size), rng.random_range(0..n - size));
            for i in 0..=size {
                paint(r0, c0 + i, rng);
                paint(r0 + size, c0 + i, rng);
                paint(r0 + i, c0, rng);
                paint(r0 + i, c0 + size, rng);
            }
        }
        _ => {
            let anti = rng.random_bool(0.5);
            let offset = rng.random_range(0..3);
            for i in 0..n - offset {
                let (r, c) = (i + offset, i);
                paint(if anti { n - 1 - r } else { r }, c, rng);
            }
        }
    }
    LabeledSample {
        input: Tensor::new(vec![n, n], img).expect("square image"),
        label,
    }
}

pub const SAMPLE_MAGIC: [u8; 4] = *b"BSF1";
const MAX_SAMPLE_ELEMENTS: usize = 1 << 28;

#[derive(Debug, Error)]
pub enum SampleFileError {
    #[error("bad magic: expected \"BSF1\", found {0:02x?}")]
    BadMagic(Vec<u8>),
    #[error("truncated sample file")]
    Truncated,
    #[error("sample dimensions overflow")]
    DimensionOverflow,
    #[error("{0} trailing bytes after sample payload")]
    TrailingBytes(usize),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// `"BSF1"`, rank `u8`, dims `u32` each, raw little-endian binary32 payload.
pub fn encode_sample(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + 4 * t.rank() + 4 * t.len());
    out.extend_from_slice(&SAMPLE_MAGIC);
    out.push(t.rank() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_sample(bytes: &[u8]) -> Result<Tensor, SampleFileError> {
    if bytes.len() < 5 {
        if bytes.len() >= 4 && bytes[..4] != SAMPLE_MAGIC {
            return Err(SampleFileError::BadMagic(bytes[..4].to_vec()));
        }
        return Err(SampleFileError::Truncated);
    }
    if bytes[..4] != SAMPLE_MAGIC {
        return Err(SampleFileError::BadMagic(bytes[..4].to_vec()));
    }
    let rank = bytes[4] as usize;
    let header = 5 + 4 * rank;
    if bytes.len() < header {
        return Err(SampleFileError::Truncated);
    }
    let shape: Vec<usize> = bytes[5..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
        .collect();
    let n = element_count(&shape)
        .filter(|&n| n <= MAX_SAMPLE_ELEMENTS)
        .ok_or(SampleFileError::DimensionOverflow)?;
    let end = header + 4 * n;
    if bytes.len() < end {
        return Err(SampleFileError::Truncated);
    }
    if bytes.len() > end {
        return Err(SampleFileError::TrailingBytes(bytes.len() - end));
    }
    let data = bytes[header..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(Tensor::new(shape, data).expect("sized by header"))
}

pub fn save_sample(t: &Tensor, path: impl AsRef<Path>) -> Result<(), SampleFileError> {
    fs::write(path, encode_sample(t))?;
    Ok(())
}

pub fn load_sample(path: impl AsRef<Path>) -> Result<Tensor, SampleFileError> {
    decode_sample(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_are_seeded_and_in_range() {
        let a = shapes(16, 4);
        let b = shapes(16, 4);
        assert_eq!(a, b);
        for s in &a {
            assert_eq!(s.input.shape(), &[SHAPE_SIDE, SHAPE_SIDE]);
            assert!(s.input.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert_eq!(a.iter().filter(|s| s.label == 2).count(), 4);
        assert_eq!(shape_sample(99), shape_sample(99));
    }

    #[test]
    fn blobs_alternate_labels() {
        let d = two_blobs(10, 1);
        assert!(d.iter().enumerate().all(|(i, s)| s.label == i % 2));
    }

    #[test]
    fn sample_file_round_trip_and_errors() {
        let t = Tensor::new(vec![2, 3], vec![0.0, -0.0, 1e-45, 0.5, 1.0, f32::MIN_POSITIVE]).unwrap();
        let bytes = encode_sample(&t);
        assert_eq!(&bytes[..4], b"BSF1");
        assert_eq!(bytes[4], 2);
        assert!(decode_sample(&bytes).unwrap().bit_eq(&t));
        assert!(matches!(decode_sample(&bytes[..bytes.len() - 2]), Err(SampleFileError::Truncated)));
        assert!(matches!(decode_sample(b""), Err(SampleFileError::Truncated)));
        assert!(matches!(decode_sample(b"PNG\x89\x00"), Err(SampleFileError::BadMagic(_))));
        let mut long = bytes.clone();
        long.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(decode_sample(&long), Err(SampleFileError::TrailingBytes(4))));
    }
}
