//! Monthly cycle of the bank / investor / loan-cluster market.
//!
//! [`rules`] holds the closed-form pieces of the cycle as plain functions;
//! [`MarketState`] owns the agents and ledgers and runs them in order.

mod agents;
pub mod rules;
mod state;

pub use agents::{
    Bank, BankFlows, BankStatus, DepositTranche, DepositVintage, Investor, InvestorFlows,
    LoanCluster, LoanTranche, OpenTranches, Placement, StrategyKey, TrancheRun,
};
pub use state::{CycleAudit, CycleEvents, GroupClearing, MarketState, RngOp};
pub(crate) use state::op_rng as state_rng;
