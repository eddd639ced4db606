//! File outputs for single runs and ensembles.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::batch::{BatchReport, EnsembleStats};
use super::RunResult;
use crate::error::{Error, Result};

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

/// Writes `s` to `path`, replacing any previous file.
pub fn write_text(path: &Path, s: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// `run_<seed>.json` in `dir`, plus `snapshot_<seed>_<YYYY-MM>.csv` per
/// snapshot when `snapshots` is set. Returns the written paths.
pub fn write_run(result: &RunResult, dir: &Path, snapshots: bool) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let path = dir.join(format!("run_{}.json", result.seed));
    write_text(&path, &(result.to_json() + "\n"))?;
    written.push(path);
    if snapshots {
        for snap in &result.snapshots {
            let path = dir.join(format!("snapshot_{}_{}.csv", result.seed, snap.month));
            let mut w = create(&path)?;
            snap.write_csv(&mut w)?;
            w.flush().map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// `evolution,crises,runs`, one row per populated histogram bin.
pub fn write_histogram<W: Write>(stats: &[&EnsembleStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["evolution", "crises", "runs"])?;
    for s in stats {
        for (k, v) in &s.histogram {
            w.write_record([s.evolution.to_string(), k.to_string(), v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("histogram csv", e))?;
    Ok(())
}

/// `evolution,seed,crisis_count,crisis_index,month`, one row per crisis.
pub fn write_timing<W: Write>(stats: &[&EnsembleStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["evolution", "seed", "crisis_count", "crisis_index", "month"])?;
    for s in stats {
        for t in &s.timings {
            w.write_record([
                s.evolution.to_string(),
                t.seed.to_string(),
                t.crisis_count.to_string(),
                t.crisis_index.to_string(),
                t.month.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("timing csv", e))?;
    Ok(())
}

/// Writes `histogram.csv` and `timing.csv` into `dir`.
pub fn write_batch(report: &BatchReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut stats = vec![&report.stats];
    if let Some((_, off)) = &report.without_evolution {
        stats.push(off);
    }
    let hist = dir.join("histogram.csv");
    let mut w = create(&hist)?;
    write_histogram(&stats, &mut w)?;
    w.flush().map_err(|e| Error::io(&hist, e))?;
    let timing = dir.join("timing.csv");
    let mut w = create(&timing)?;
    write_timing(&stats, &mut w)?;
    w.flush().map_err(|e| Error::io(&timing, e))?;
    Ok(vec![hist, timing])
}
