//! Prediction/gradient oracles.
//!
//! An oracle answers classification and input-gradient queries for one model
//! evaluated under one emulated microarchitecture. [`LocalOracle`] runs in
//! process; [`RemoteOracle`] talks to a [`Server`] over the binary protocol in
//! [`protocol`]. Both count their queries.

pub mod protocol;
mod remote;
mod server;

pub use remote::{RemoteOracle, DEFAULT_TIMEOUT};
pub use server::{serve, Server, ServerHandle, ServerStats};

use std::fmt;
use std::io;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{forward, input_gradient, Model, ModelError, Prediction};
use crate::numerics::{AccumulationStrategy, Tensor};
use protocol::Status;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("transport error: {0}")]
    Transport(#[from] io::Error),
    #[error("truncated frame")]
    TruncatedFrame,
    #[error("version mismatch: client speaks {expected}, server speaks {found}")]
    VersionMismatch { expected: u8, found: u8 },
    #[error("server returned {0}")]
    Remote(Status),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl OracleError {
    /// Errors that come from the connection rather than from the query.
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            OracleError::Transport(_) | OracleError::TruncatedFrame | OracleError::Protocol(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OracleKind {
    Local,
    Remote(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OracleId {
    pub index: usize,
    pub ma_id: u32,
    pub kind: OracleKind,
}

impl fmt::Display for OracleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            OracleKind::Local => write!(f, "#{} MA{} (local)", self.index, self.ma_id),
            OracleKind::Remote(addr) => write!(f, "#{} MA{} ({addr})", self.index, self.ma_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub oracle: OracleId,
    pub prediction: Prediction,
    pub gradient: Option<Tensor>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCounts {
    pub predict_count: u64,
    pub gradient_count: u64,
}

/// Per-oracle query totals, in oracle order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryLedger {
    pub entries: Vec<(OracleId, QueryCounts)>,
}

impl QueryLedger {
    pub fn snapshot(oracles: &[BoxedOracle]) -> Self {
        Self {
            entries: oracles.iter().map(|o| (o.id().clone(), o.counts())).collect(),
        }
    }

    pub fn total(&self) -> QueryCounts {
        self.entries.iter().fold(QueryCounts::default(), |acc, (_, c)| QueryCounts {
            predict_count: acc.predict_count + c.predict_count,
            gradient_count: acc.gradient_count + c.gradient_count,
        })
    }
}

pub trait Oracle {
    fn id(&self) -> &OracleId;

    /// Prediction only.
    fn predict(&mut self, x: &Tensor) -> Result<OracleResult, OracleError>;

    /// Prediction plus the input gradient of its confidence gap.
    fn gradient(&mut self, x: &Tensor) -> Result<OracleResult, OracleError>;

    fn counts(&self) -> QueryCounts;
}

pub type BoxedOracle = Box<dyn Oracle + Send>;

/// In-process oracle over a shared model.
pub struct LocalOracle {
    id: OracleId,
    model: Arc<Model>,
    strategy: AccumulationStrategy,
    counts: QueryCounts,
}

impl LocalOracle {
    pub fn new(index: usize, ma_id: u32, model: Arc<Model>, strategy: AccumulationStrategy) -> Self {
        Self {
            id: OracleId {
                index,
                ma_id,
                kind: OracleKind::Local,
            },
            model,
            strategy,
            counts: QueryCounts::default(),
        }
    }

    pub fn strategy(&self) -> AccumulationStrategy {
        self.strategy
    }
}

impl Oracle for LocalOracle {
    fn id(&self) -> &OracleId {
        &self.id
    }

    fn predict(&mut self, x: &Tensor) -> Result<OracleResult, OracleError> {
        let prediction = forward(&self.model, x, self.strategy)?;
        self.counts.predict_count += 1;
        Ok(OracleResult {
            oracle: self.id.clone(),
            prediction,
            gradient: None,
        })
    }

    fn gradient(&mut self, x: &Tensor) -> Result<OracleResult, OracleError> {
        let prediction = forward(&self.model, x, self.strategy)?;
        let gradient = input_gradient(&self.model, x, self.strategy)?;
        self.counts.gradient_count += 1;
        Ok(OracleResult {
            oracle: self.id.clone(),
            prediction,
            gradient: Some(gradient),
        })
    }

    fn counts(&self) -> QueryCounts {
        self.counts
    }
}
