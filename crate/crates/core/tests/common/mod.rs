#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Signed;

use telltale::model::{Activation, Layer, Model};
use telltale::numerics::{AccumulationStrategy, Tensor};
use telltale::oracle::{BoxedOracle, LocalOracle};

/// Exact value of a finite f32, scaled by 2^149 so every f32 is an integer.
pub fn scaled(v: f32) -> BigInt {
    assert!(v.is_finite());
    let bits = v.to_bits();
    let exp = ((bits >> 23) & 0xff) as i32;
    let frac = (bits & 0x7f_ffff) as u64;
    let (mantissa, shift) = if exp == 0 { (frac, 0) } else { (frac | 0x80_0000, exp - 1) };
    let magnitude = BigInt::from(mantissa) << shift as usize;
    if bits >> 31 == 1 {
        -magnitude
    } else {
        magnitude
    }
}

pub fn exact_sum(values: &[f32]) -> BigInt {
    values.iter().map(|&v| scaled(v)).sum()
}

/// `|result - exact|` in units of 2^-149.
pub fn abs_error(result: f32, exact: &BigInt) -> BigInt {
    (scaled(result) - exact).abs()
}

/// A vector on which two strategies round differently.
#[derive(Debug, Clone)]
pub struct Witness {
    pub a: AccumulationStrategy,
    pub b: AccumulationStrategy,
    pub values: Vec<f32>,
}

pub fn witness_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/divergence_witnesses.txt")
}

/// One witness per line: `strategy strategy hex-bits...`; `#` starts a comment.
pub fn parse_witnesses(text: &str) -> Vec<Witness> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut parts = l.split_whitespace();
            let a = parts.next().unwrap().parse().unwrap();
            let b = parts.next().unwrap().parse().unwrap();
            let values = parts
                .map(|h| f32::from_bits(u32::from_str_radix(h, 16).unwrap()))
                .collect();
            Witness { a, b, values }
        })
        .collect()
}

pub fn format_witness(w: &Witness) -> String {
    let bits: Vec<String> = w.values.iter().map(|v| format!("{:08x}", v.to_bits())).collect();
    format!("{} {} {}", w.a, w.b, bits.join(" "))
}

pub fn load_witnesses() -> Vec<Witness> {
    parse_witnesses(&std::fs::read_to_string(witness_path()).expect("witness file"))
}

/// Every unordered pair of the default strategies.
pub fn default_pairs() -> Vec<(AccumulationStrategy, AccumulationStrategy)> {
    let s = AccumulationStrategy::DEFAULTS;
    let mut pairs = Vec::new();
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            pairs.push((s[i], s[j]));
        }
    }
    pairs
}

/// Single-layer two-class model with logits `w0 . x + b0` and `w1 . x + b1`.
pub fn linear_two_class(w0: Vec<f32>, w1: Vec<f32>, bias: [f32; 2]) -> Model {
    let n = w0.len();
    let mut w = w0;
    w.extend(w1);
    let layer = Layer::new(
        Tensor::new(vec![2, n], w).unwrap(),
        Tensor::vector(bias.to_vec()),
        Activation::Identity,
    )
    .unwrap();
    Model::new(vec![layer]).unwrap()
}

/// One in-process oracle per strategy, MA ids in order.
pub fn local_oracles(model: &Arc<Model>, strategies: &[AccumulationStrategy]) -> Vec<BoxedOracle> {
    strategies
        .iter()
        .enumerate()
        .map(|(i, &s)| Box::new(LocalOracle::new(i, i as u32, model.clone(), s)) as BoxedOracle)
        .collect()
}

pub fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_telltale")
}

/// Forward pass in f64, independent of the crate's kernels.
pub fn probs_f64(model: &Model, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for layer in model.layers() {
        let (rows, cols) = (layer.out_dim(), layer.in_dim());
        let w = layer.weights.data();
        let b = layer.bias.data();
        let mut z: Vec<f64> = (0..rows)
            .map(|r| b[r] as f64 + (0..cols).map(|c| w[r * cols + c] as f64 * a[c]).sum::<f64>())
            .collect();
        if layer.activation == Activation::Relu {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        a = z;
    }
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Central differences of `p[top] - p[second]` with both classes held fixed.
pub fn margin_fd(model: &Model, x: &[f32], top: usize, second: usize, h: f64) -> Vec<f64> {
    let base: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    (0..x.len())
        .map(|i| {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[i] += h;
            minus[i] -= h;
            let (p, m) = (probs_f64(model, &plus), probs_f64(model, &minus));
            ((p[top] - p[second]) - (m[top] - m[second])) / (2.0 * h)
        })
        .collect()
}

/// Share of coordinates within `rel` relative error; coordinates whose
/// analytic magnitude is below `floor` are left out.
pub fn gradient_agreement(analytic: &[f32], numeric: &[f64], rel: f64, floor: f64) -> (usize, usize) {
    let mut checked = 0;
    let mut good = 0;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let a = a as f64;
        if a.abs() < floor {
            continue;
        }
        checked += 1;
        if (a - n).abs() <= rel * a.abs().max(n.abs()) {
            good += 1;
        }
    }
    (good, checked)
}
