//! Boundary samples: inputs whose predicted label reveals which numerical
//! backend evaluated a classifier.
//!
//! The crate provides emulated backends ([`numerics::AccumulationStrategy`]),
//! a small dense classifier ([`model`]), local and networked prediction
//! oracles ([`oracle`]), the boundary-sample search ([`search`]) and
//! transparency metrics ([`metrics`]). [`cli`] wires them into the `telltale`
//! binary.

pub mod cli;
pub mod data;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod search;
