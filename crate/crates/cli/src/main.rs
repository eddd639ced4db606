use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod common;
mod net;
mod sim;

/// Agent-based simulation of household credit cycles and diagnostics for
/// firm payment networks.
#[derive(Debug, Parser)]
#[command(name = "ecofin", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation.
    Simulate(sim::SimulateArgs),
    /// Run an ensemble of seeds and write crisis statistics.
    Batch(sim::BatchArgs),
    /// Targeted removal sweep, with optional f_c fit, survivor report and contagion threshold.
    Percolate(net::PercolateArgs),
    /// Degree-preserving rewiring of a firm network.
    Randomize(net::RandomizeArgs),
    /// Sector and region make-up of the firms surviving a removal sweep.
    Report(net::ReportCmdArgs),
    /// Synthetic firm network with planted clusters.
    Generate(net::GenerateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => sim::simulate(a),
        Command::Batch(a) => sim::batch(a),
        Command::Percolate(a) => net::percolate(a),
        Command::Randomize(a) => net::randomize_cmd(a),
        Command::Report(a) => net::report_cmd(a),
        Command::Generate(a) => net::generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(common::exit_code(&e))
        }
    }
}
