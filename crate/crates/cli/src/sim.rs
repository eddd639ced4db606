use std::path::PathBuf;

use clap::Args;
use ecofin_core::engine::{export, load_rates, run_batch, BatchOptions, Simulation};
use ecofin_core::{Error, Exec};
use serde_json::json;

use crate::common::{config_json, effective_config, ensure_dir, manifest, parse_seeds, write_json};

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML config file; relative paths are also looked up in $ECOFIN_CONFIG_DIR.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set evolution.enabled=false`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub seed: u64,
    /// Also write the sampled network snapshots as CSV.
    #[arg(long)]
    pub snapshots: bool,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Inclusive seed range `a..b`.
    #[arg(long, default_value = "1..900")]
    pub seeds: String,
    /// Upper bound on worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also run every seed with evolution disabled.
    #[arg(long)]
    pub compare: bool,
    /// Run the seeds one after another on the calling thread.
    #[arg(long)]
    pub sequential: bool,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Error> {
    let (cfg, file) = effective_config(args.common.config.as_deref(), &args.common.overrides)?;
    let rates = load_rates(&cfg)?;
    let result = Simulation::new(&cfg, &rates, args.seed)?.run_to_end()?;
    ensure_dir(&args.common.out)?;
    let written = export::write_run(&result, &args.common.out, args.snapshots)?;
    let stem = format!("run_{}", args.seed);
    let m = manifest(
        "simulate",
        config_json(&cfg, file.as_deref())?,
        &written,
        json!({
            "seed": args.seed,
            "crises": result.crisis_count(),
            "crisis_months": result.crisis_months,
        }),
    );
    write_json(&args.common.out.join(format!("{stem}.manifest.json")), &m)?;
    println!(
        "seed {}: {} crises {:?} -> {}",
        args.seed,
        result.crisis_count(),
        result.crisis_months.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        written[0].display()
    );
    Ok(())
}

pub fn batch(args: &BatchArgs) -> Result<(), Error> {
    let (cfg, file) = effective_config(args.common.config.as_deref(), &args.common.overrides)?;
    let seeds = parse_seeds(&args.seeds)?;
    if args.workers == Some(0) {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let rates = load_rates(&cfg)?;
    let opts = BatchOptions {
        exec: if args.sequential { Exec::Sequential } else { Exec::Parallel },
        workers: args.workers,
        compare_without_evolution: args.compare,
    };
    let report = run_batch(&cfg, &rates, &seeds, opts);
    ensure_dir(&args.common.out)?;
    let written = export::write_batch(&report, &args.common.out)?;

    let off = report.without_evolution.as_ref().map(|(o, _)| o);
    let rows: Vec<_> = report
        .outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let mut row = json!({
                "seed": o.seed,
                "status": if o.error.is_some() { "failed" } else { "ok" },
                "crises": o.crisis_months.len(),
                "crisis_months": o.crisis_months,
                "error": o.error,
            });
            if let Some(off) = off {
                row["crises_without_evolution"] = json!(off[i].crisis_months.len());
                row["error_without_evolution"] = json!(off[i].error);
            }
            row
        })
        .collect();
    let m = manifest(
        "batch",
        config_json(&cfg, file.as_deref())?,
        &written,
        json!({
            "seeds": args.seeds,
            "stats": report.stats,
            "stats_without_evolution": report.without_evolution.as_ref().map(|(_, s)| s),
            "runs": rows,
        }),
    );
    write_json(&args.common.out.join("batch.manifest.json"), &m)?;

    let s = &report.stats;
    println!(
        "{} seeds ({} failed), mean crises {:.3}, mode {:?}, histogram {:?}",
        s.seeds, s.failed, s.mean_crises, s.modal_crises, s.histogram
    );
    if let Some((_, off)) = &report.without_evolution {
        println!(
            "without evolution: mean crises {:.3}, mode {:?}, histogram {:?}",
            off.mean_crises, off.modal_crises, off.histogram
        );
    }
    Ok(())
}
