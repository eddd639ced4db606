use std::collections::BTreeMap;

use serde::Serialize;

use super::simulate;
use crate::config::SimConfig;
use crate::par::{self, Exec};
use crate::rates::{RateSeries, YearMonth};

#[derive(Debug, Clone, Copy, Default)]
pub struct BatchOptions {
    pub exec: Exec,
    /// Upper bound on worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Also run every seed with evolution disabled.
    pub compare_without_evolution: bool,
}

/// Outcome of one seed in a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub evolution: bool,
    pub crisis_months: Vec<YearMonth>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrisisTiming {
    pub seed: u64,
    /// Number of crises in the seed's run.
    pub crisis_count: usize,
    /// 1-based position of this crisis within the run.
    pub crisis_index: usize,
    pub month: YearMonth,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub evolution: bool,
    pub seeds: usize,
    pub failed: usize,
    /// Crisis count -> number of runs.
    pub histogram: BTreeMap<usize, usize>,
    pub timings: Vec<CrisisTiming>,
    pub mean_crises: f64,
    /// Most frequent crisis count, smallest on ties.
    pub modal_crises: Option<usize>,
}

impl EnsembleStats {
    pub fn from_outcomes(evolution: bool, outcomes: &[SeedOutcome]) -> Self {
        let mut histogram = BTreeMap::new();
        let mut timings = Vec::new();
        let mut total = 0usize;
        let mut ok = 0usize;
        for o in outcomes.iter().filter(|o| o.error.is_none()) {
            let n = o.crisis_months.len();
            *histogram.entry(n).or_insert(0) += 1;
            total += n;
            ok += 1;
            for (i, &month) in o.crisis_months.iter().enumerate() {
                timings.push(CrisisTiming {
                    seed: o.seed,
                    crisis_count: n,
                    crisis_index: i + 1,
                    month,
                });
            }
        }
        let modal_crises = histogram
            .iter()
            .fold(None, |best: Option<(usize, usize)>, (&k, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((k, v)),
            })
            .map(|b| b.0);
        Self {
            evolution,
            seeds: outcomes.len(),
            failed: outcomes.len() - ok,
            histogram,
            timings,
            mean_crises: if ok == 0 { 0.0 } else { total as f64 / ok as f64 },
            modal_crises,
        }
    }

    /// Runs summed over the histogram.
    pub fn mass(&self) -> usize {
        self.histogram.values().sum()
    }

    /// Share of runs with exactly `k` crises.
    pub fn fraction_with(&self, k: usize) -> f64 {
        let mass = self.mass();
        if mass == 0 {
            0.0
        } else {
            self.histogram.get(&k).copied().unwrap_or(0) as f64 / mass as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub outcomes: Vec<SeedOutcome>,
    pub stats: EnsembleStats,
    pub without_evolution: Option<(Vec<SeedOutcome>, EnsembleStats)>,
}

fn run_all(config: &SimConfig, rates: &RateSeries, seeds: &[u64], exec: Exec) -> Vec<SeedOutcome> {
    par::map_indexed(exec, seeds, |_, &seed| match simulate(config, rates, seed) {
        Ok(r) => SeedOutcome {
            seed,
            evolution: config.evolution.enabled,
            crisis_months: r.crisis_months,
            error: None,
        },
        Err(e) => SeedOutcome {
            seed,
            evolution: config.evolution.enabled,
            crisis_months: Vec::new(),
            error: Some(e.to_string()),
        },
    })
}

/// One independent run per seed. Seed failures are reported per seed and do
/// not abort the batch. Results are in seed order whatever the worker count.
pub fn run_batch(config: &SimConfig, rates: &RateSeries, seeds: &[u64], opts: BatchOptions) -> BatchReport {
    par::with_workers(opts.workers, || {
        let outcomes = run_all(config, rates, seeds, opts.exec);
        let stats = EnsembleStats::from_outcomes(config.evolution.enabled, &outcomes);
        let without_evolution = opts.compare_without_evolution.then(|| {
            let mut off = config.clone();
            off.evolution.enabled = false;
            let o = run_all(&off, rates, seeds, opts.exec);
            let s = EnsembleStats::from_outcomes(false, &o);
            (o, s)
        });
        BatchReport {
            outcomes,
            stats,
            without_evolution,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(seed: u64, n: usize) -> SeedOutcome {
        SeedOutcome {
            seed,
            evolution: true,
            crisis_months: (0..n).map(|i| YearMonth::new(1980 + i as i32, 1)).collect(),
            error: None,
        }
    }

    #[test]
    fn histogram_and_mode() {
        let o = vec![outcome(1, 1), outcome(2, 2), outcome(3, 1), outcome(4, 0)];
        let s = EnsembleStats::from_outcomes(true, &o);
        assert_eq!(s.mass(), 4);
        assert_eq!(s.modal_crises, Some(1));
        assert_eq!(s.mean_crises, 1.0);
        assert_eq!(s.timings.len(), 4);
        assert_eq!(s.fraction_with(1), 0.5);
    }

    #[test]
    fn failed_seeds_are_excluded_from_mass() {
        let mut bad = outcome(9, 0);
        bad.error = Some("boom".into());
        let s = EnsembleStats::from_outcomes(true, &[outcome(1, 0), bad]);
        assert_eq!(s.seeds, 2);
        assert_eq!(s.failed, 1);
        assert_eq!(s.mass(), 1);
    }
}
