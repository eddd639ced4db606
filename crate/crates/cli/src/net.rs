use std::path::{Path, PathBuf};

use clap::Args;
use ecofin_core::network::contagion::parse_p_grid;
use ecofin_core::network::io::{load_graph, save_graph, write_sweep};
use ecofin_core::network::randomize::default_swaps;
use ecofin_core::network::{
    estimate_pc, fit_fc, generate_synthetic, randomize, removal_sweep, survivors_report,
    ContagionOptions, FirmGraph, RemovalOrder, ReportOptions, SyntheticParams,
};
use ecofin_core::{Error, Exec};
use serde_json::{json, Value};

use crate::common::{ensure_dir, manifest, write_json};

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Node CSV with header `id,sales,sector,region`.
    #[arg(long)]
    pub nodes: PathBuf,
    /// Edge CSV with header `src,dst`, pointing the way money flows.
    #[arg(long)]
    pub edges: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Removal order: `sales` or `degree`.
    #[arg(long, default_value = "sales")]
    pub order: String,
    /// Fraction of nodes removed between LSCC evaluations.
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Removed fraction the survivors are taken below; defaults to the fitted f_c.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Flag cells whose concentration exceeds the baseline by this factor.
    #[arg(long, default_value_t = 3.0)]
    pub factor: f64,
    #[arg(long, default_value_t = 3)]
    pub min_survivors: usize,
    /// Compare against the survivors of a degree-preserving rewired copy
    /// instead of the uniform baseline.
    #[arg(long)]
    pub rewired_baseline: bool,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PercolateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Fit the critical fraction f_c.
    #[arg(long)]
    pub fit: bool,
    /// Attribute the survivors below the threshold.
    #[arg(long)]
    pub report: bool,
    #[arg(long, default_value_t = 3.0)]
    pub factor: f64,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Estimate the contagion threshold p_c.
    #[arg(long)]
    pub contagion: bool,
    /// `start:step:end` or a comma-separated list of propagation probabilities.
    #[arg(long, default_value = "0:0.01:1")]
    pub p_grid: String,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Removed fraction that counts as spanning the network.
    #[arg(long, default_value_t = 0.5)]
    pub spanning: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RandomizeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Attempted swaps; defaults to ten per edge.
    #[arg(long)]
    pub swaps: Option<u64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportCmdArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML generator parameters.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Override a parameter, e.g. `--set nodes=1000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn check_fraction(name: &str, v: f64) -> Result<(), Error> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")))
    }
}

fn write_sweep_file(path: &Path, sweep: &ecofin_core::network::RemovalSweep) -> Result<(), Error> {
    let mut buf = Vec::new();
    write_sweep(sweep, &mut buf)?;
    ecofin_core::engine::export::write_text(path, &String::from_utf8_lossy(&buf))
}

fn graph_json(g: &GraphArgs, graph: &FirmGraph) -> Value {
    json!({
        "nodes_file": g.nodes.display().to_string(),
        "edges_file": g.edges.display().to_string(),
        "nodes": graph.len(),
        "edges": graph.edge_count(),
    })
}

fn threshold_for(
    explicit: Option<f64>,
    sweep: &ecofin_core::network::RemovalSweep,
) -> Result<(f64, Option<ecofin_core::network::CriticalFit>), Error> {
    match explicit {
        Some(t) => {
            check_fraction("--threshold", t)?;
            Ok((t, None))
        }
        None => {
            let fit = fit_fc(sweep)?;
            Ok((fit.f_c, Some(fit)))
        }
    }
}

pub fn percolate(args: &PercolateArgs) -> Result<(), Error> {
    let order: RemovalOrder = args.sweep.order.parse()?;
    check_fraction("--spanning", args.spanning)?;
    let grid = if args.contagion { Some(parse_p_grid(&args.p_grid)?) } else { None };
    let graph = load_graph(&args.graph.nodes, &args.graph.edges)?;
    ensure_dir(&args.graph.out)?;
    let out = &args.graph.out;

    ecofin_core::par::with_workers(args.workers, || {
        let sweep = removal_sweep(&graph, order, args.sweep.step, Exec::Parallel)?;
        let mut written = vec![out.join("sweep.csv")];
        write_sweep_file(&written[0], &sweep)?;
        let mut summary = json!({ "order": order, "step": args.sweep.step });

        let fit = if args.fit || (args.report && args.threshold.is_none()) {
            Some(fit_fc(&sweep)?)
        } else {
            None
        };
        if let (true, Some(fit)) = (args.fit, &fit) {
            let path = out.join("fit.json");
            write_json(&path, &serde_json::to_value(fit)?)?;
            written.push(path);
            summary["f_c"] = json!(fit.f_c);
            println!("f_c = {:.4}, exponent = {:.3}, residual = {:.4}", fit.f_c, fit.exponent, fit.residual);
        }
        if args.report {
            let t = match args.threshold {
                Some(t) => {
                    check_fraction("--threshold", t)?;
                    t
                }
                None => fit.as_ref().expect("fitted above").f_c,
            };
            let opts = ReportOptions {
                factor: args.factor,
                ..Default::default()
            };
            let rep = survivors_report(&graph, &sweep, t, None, &opts);
            let path = out.join("report.json");
            write_json(&path, &serde_json::to_value(&rep)?)?;
            written.push(path);
            println!(
                "{} survivors below f = {:.4}; flagged cells {:?}",
                rep.survivors.len(),
                t,
                rep.flagged_cells()
            );
        }
        if let Some(grid) = &grid {
            let opts = ContagionOptions {
                trials: args.trials,
                spanning_fraction: args.spanning,
                seed: args.seed,
                ..Default::default()
            };
            let est = estimate_pc(&graph, grid, &opts, Exec::Parallel)?;
            let path = out.join("contagion.json");
            write_json(&path, &serde_json::to_value(&est)?)?;
            written.push(path);
            summary["p_c"] = json!(est.p_c);
            println!(
                "p_c = {:.4}{}",
                est.p_c,
                if est.unbounded { " (no crossing on the grid; lower bound)" } else { "" }
            );
        }
        let settings = json!({
            "graph": graph_json(&args.graph, &graph),
            "order": order,
            "step": args.sweep.step,
            "fit": args.fit,
            "report": args.report,
            "factor": args.factor,
            "threshold": args.threshold,
            "contagion": args.contagion,
            "p_grid": args.p_grid,
            "trials": args.trials,
            "spanning": args.spanning,
            "seed": args.seed,
        });
        let m = manifest("percolate", settings, &written, summary);
        write_json(&out.join("percolate.manifest.json"), &m)
    })
}

pub fn randomize_cmd(args: &RandomizeArgs) -> Result<(), Error> {
    let graph = load_graph(&args.graph.nodes, &args.graph.edges)?;
    let swaps = args.swaps.unwrap_or_else(|| default_swaps(&graph));
    let (rewired, stats) = randomize(&graph, swaps, args.seed)?;
    ensure_dir(&args.graph.out)?;
    let nodes = args.graph.out.join("randomized_nodes.csv");
    let edges = args.graph.out.join("randomized_edges.csv");
    save_graph(&rewired, &nodes, &edges)?;
    let settings = json!({
        "graph": graph_json(&args.graph, &graph),
        "swaps": swaps,
        "seed": args.seed,
    });
    let m = manifest("randomize", settings, &[nodes, edges], serde_json::to_value(stats)?);
    write_json(&args.graph.out.join("randomize.manifest.json"), &m)?;
    println!("{} of {} swaps accepted", stats.accepted, stats.attempted);
    Ok(())
}

pub fn report_cmd(args: &ReportCmdArgs) -> Result<(), Error> {
    let order: RemovalOrder = args.sweep.order.parse()?;
    let graph = load_graph(&args.graph.nodes, &args.graph.edges)?;
    let sweep = removal_sweep(&graph, order, args.sweep.step, Exec::Parallel)?;
    let (t, fit) = threshold_for(args.report.threshold, &sweep)?;
    let opts = ReportOptions {
        factor: args.report.factor,
        min_survivors: args.report.min_survivors,
    };
    let baseline = if args.report.rewired_baseline {
        let (rewired, _) = randomize(&graph, default_swaps(&graph), args.report.seed)?;
        let rsweep = removal_sweep(&rewired, order, args.sweep.step, Exec::Parallel)?;
        let (rt, _) = threshold_for(args.report.threshold, &rsweep)?;
        Some(survivors_report(&rewired, &rsweep, rt, None, &opts))
    } else {
        None
    };
    let rep = survivors_report(&graph, &sweep, t, baseline.as_ref(), &opts);
    ensure_dir(&args.graph.out)?;
    let path = args.graph.out.join("report.json");
    write_json(&path, &serde_json::to_value(&rep)?)?;
    let settings = json!({
        "graph": graph_json(&args.graph, &graph),
        "order": order,
        "step": args.sweep.step,
        "threshold": args.report.threshold,
        "factor": args.report.factor,
        "min_survivors": args.report.min_survivors,
        "rewired_baseline": args.report.rewired_baseline,
        "seed": args.report.seed,
    });
    let m = manifest("report", settings, &[path], json!({ "f_threshold": t, "fit": fit }));
    write_json(&args.graph.out.join("report.manifest.json"), &m)?;
    println!(
        "{} survivors below f = {:.4}; flagged cells {:?}",
        rep.survivors.len(),
        t,
        rep.flagged_cells()
    );
    Ok(())
}

pub fn generate(args: &GenerateArgs) -> Result<(), Error> {
    let base = match &args.params {
        Some(p) => {
            if !p.exists() {
                return Err(Error::Config(format!("parameter file {} not found", p.display())));
            }
            SyntheticParams::load(p)?
        }
        None => SyntheticParams::default(),
    };
    let params = base.with_overrides(&args.overrides)?;
    let syn = generate_synthetic(&params, args.seed)?;
    ensure_dir(&args.out)?;
    let nodes = args.out.join("nodes.csv");
    let edges = args.out.join("edges.csv");
    save_graph(&syn.graph, &nodes, &edges)?;
    let truth = args.out.join("truth.json");
    write_json(&truth, &serde_json::to_value(&syn.truth)?)?;
    let settings = json!({ "params": serde_json::to_value(&params)?, "seed": args.seed });
    let m = manifest(
        "generate",
        settings,
        &[nodes, edges, truth],
        json!({ "nodes": syn.graph.len(), "edges": syn.graph.edge_count() }),
    );
    write_json(&args.out.join("generate.manifest.json"), &m)?;
    println!("{} nodes, {} edges", syn.graph.len(), syn.graph.edge_count());
    Ok(())
}
