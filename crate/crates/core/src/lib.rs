//! Agent-based simulation of a deposit and loan market between investors and
//! banks, with cultural evolution of risk-taking, plus percolation diagnostics
//! for directed firm networks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod environment;
pub mod error;
pub mod evolution;
pub mod market;
pub mod network;
pub mod par;
pub mod rates;

pub use config::SimConfig;
pub use engine::{simulate, RunResult, Simulation};
pub use error::{Error, Result};
pub use par::Exec;
pub use rates::{RateSeries, YearMonth};
