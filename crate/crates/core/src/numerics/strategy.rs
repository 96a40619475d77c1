//! Accumulation strategies.
//!
//! Each strategy is one emulated microarchitecture: the real-valued sum is the
//! same, but the order of binary32 roundings differs, so the last bits of a
//! reduction (and therefore of every dot product in a forward pass) differ.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Partial-sum width used by [`AccumulationStrategy::Blocked`] when none is given.
pub const DEFAULT_BLOCK_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum AccumulationStrategy {
    /// Left-to-right fold.
    Sequential,
    /// Right-to-left fold.
    Reversed,
    /// Recursive halving, left half first.
    PairwiseTree,
    /// Kahan-Babuska (Neumaier) compensated summation.
    KahanCompensated,
    /// Sequential sums of consecutive blocks, then a sequential sum of the partials.
    Blocked(usize),
}

impl AccumulationStrategy {
    /// The five strategies used when no explicit set is configured.
    pub const DEFAULTS: [AccumulationStrategy; 5] = [
        AccumulationStrategy::Sequential,
        AccumulationStrategy::Reversed,
        AccumulationStrategy::PairwiseTree,
        AccumulationStrategy::KahanCompensated,
        AccumulationStrategy::Blocked(DEFAULT_BLOCK_SIZE),
    ];

    pub fn blocked(block_size: usize) -> Result<Self, NumericsError> {
        if block_size == 0 {
            return Err(NumericsError::InvalidBlockSize);
        }
        Ok(Self::Blocked(block_size))
    }

    /// Sum `values` under this strategy. The empty sum is exactly `0.0`.
    pub fn reduce(self, values: &[f32]) -> f32 {
        match self {
            Self::Sequential => values.iter().fold(0.0f32, |acc, &v| acc + v),
            Self::Reversed => values.iter().rev().fold(0.0f32, |acc, &v| acc + v),
            Self::PairwiseTree => pairwise(values),
            Self::KahanCompensated => neumaier(values),
            Self::Blocked(size) => {
                let size = size.max(1);
                values
                    .chunks(size)
                    .map(|block| block.iter().fold(0.0f32, |acc, &v| acc + v))
                    .fold(0.0f32, |acc, v| acc + v)
            }
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Every accepted spelling, for usage messages.
    pub fn valid_names() -> &'static str {
        "sequential, reversed, pairwise, kahan, blocked, blocked-<N>"
    }
}

fn pairwise(values: &[f32]) -> f32 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise(lo) + pairwise(hi)
        }
    }
}

fn neumaier(values: &[f32]) -> f32 {
    let mut sum = 0.0f32;
    let mut comp = 0.0f32;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Free-function form of [`AccumulationStrategy::reduce`].
pub fn reduce_sum(values: &[f32], strategy: AccumulationStrategy) -> f32 {
    strategy.reduce(values)
}

impl fmt::Display for AccumulationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sequential => f.write_str("sequential"),
            Self::Reversed => f.write_str("reversed"),
            Self::PairwiseTree => f.write_str("pairwise"),
            Self::KahanCompensated => f.write_str("kahan"),
            Self::Blocked(n) if *n == DEFAULT_BLOCK_SIZE => f.write_str("blocked"),
            Self::Blocked(n) => write!(f, "blocked-{n}"),
        }
    }
}

impl FromStr for AccumulationStrategy {
    type Err = NumericsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "sequential" | "seq" => Ok(Self::Sequential),
            "reversed" | "rev" => Ok(Self::Reversed),
            "pairwise" | "pairwise-tree" | "tree" => Ok(Self::PairwiseTree),
            "kahan" | "kahan-compensated" | "neumaier" => Ok(Self::KahanCompensated),
            "blocked" => Ok(Self::Blocked(DEFAULT_BLOCK_SIZE)),
            other => other
                .strip_prefix("blocked-")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n > 0)
                .map(Self::Blocked)
                .ok_or_else(|| NumericsError::UnknownStrategy(s.to_string())),
        }
    }
}

impl From<AccumulationStrategy> for String {
    fn from(s: AccumulationStrategy) -> Self {
        s.to_string()
    }
}

impl TryFrom<String> for AccumulationStrategy {
    type Error = NumericsError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
