use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use crate::model::Model;
use crate::numerics::AccumulationStrategy;
use crate::oracle::{BoxedOracle, LocalOracle, OracleError, RemoteOracle};
use crate::search::SearchConfig;

/// Where one oracle's answers come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleTarget {
    InProcess(AccumulationStrategy),
    Remote(String),
}

/// `MA:strategy` or `MA:host:port`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSpec {
    pub ma_id: u32,
    pub target: OracleTarget,
}

impl FromStr for OracleSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (ma, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("expected MA:strategy or MA:host:port, got {s:?}"))?;
        let ma_id = ma
            .trim()
            .parse()
            .map_err(|_| format!("MA id must be a non-negative integer, got {ma:?}"))?;
        let target = if rest.contains(':') {
            OracleTarget::Remote(rest.to_string())
        } else {
            OracleTarget::InProcess(rest.parse().map_err(|e| format!("{e}"))?)
        };
        Ok(Self { ma_id, target })
    }
}

impl fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.target {
            OracleTarget::InProcess(s) => write!(f, "{}:{s}", self.ma_id),
            OracleTarget::Remote(addr) => write!(f, "{}:{addr}", self.ma_id),
        }
    }
}

pub fn distinct_mas(specs: &[OracleSpec]) -> usize {
    specs.iter().map(|s| s.ma_id).collect::<BTreeSet<_>>().len()
}

/// Open one oracle per spec, in order; remote oracles get a fresh connection.
pub fn open_oracles(specs: &[OracleSpec], model: &Arc<Model>) -> Result<Vec<BoxedOracle>, OracleError> {
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| -> Result<BoxedOracle, OracleError> {
            Ok(match &spec.target {
                OracleTarget::InProcess(s) => Box::new(LocalOracle::new(i, spec.ma_id, model.clone(), *s)),
                OracleTarget::Remote(addr) => Box::new(RemoteOracle::connect(addr, spec.ma_id, i)?),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleSource {
    /// Shapes drawn from seeds `seed, seed + 1, ...`.
    Seeds { seed: u64, count: usize },
    /// Sample files, seeded by position.
    Files(Vec<PathBuf>),
}

/// Everything that determines a forge run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub model: PathBuf,
    pub oracles: Vec<OracleSpec>,
    pub config: SearchConfig,
    pub source: SampleSource,
    pub out: PathBuf,
    /// Index into `oracles` used for the local phase.
    pub local: usize,
    /// Worker threads; 0 picks the machine default.
    pub jobs: usize,
}
