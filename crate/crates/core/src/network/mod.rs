//! Percolation diagnostics for directed firm networks: the largest strongly
//! connected cluster under targeted removal, cascade thresholds, a
//! degree-preserving null model and survivor attribution.

pub mod contagion;
pub mod fit;
pub mod graph;
pub mod io;
pub mod lscc;
pub mod randomize;
pub mod report;
pub mod sweep;
pub mod synth;

pub use contagion::{contagion_trial, estimate_pc, ContagionEstimate, ContagionOptions};
pub use fit::{fit_fc, fit_fc_with, CriticalFit, FitOptions};
pub use graph::{Firm, FirmGraph, Sector};
pub use lscc::lscc;
pub use randomize::{randomize, SwapStats};
pub use report::{survivors_report, ReportOptions, SurvivorsReport};
pub use sweep::{removal_sweep, RemovalOrder, RemovalSweep, SweepPoint};
pub use synth::{generate_synthetic, GroundTruth, PlantedCluster, Synthetic, SyntheticParams};
