//! Drives the monthly cycle over a horizon, records metrics, detects crises
//! and runs seeded ensembles.

mod batch;
pub mod crisis;
pub mod export;
pub mod snapshot;
pub mod strategies;

use std::collections::BTreeSet;

use serde::Serialize;

pub use batch::{run_batch, BatchOptions, BatchReport, CrisisTiming, EnsembleStats, SeedOutcome};
pub use crisis::detect_crises;
pub use snapshot::{export_snapshot, Snapshot};
pub use strategies::{track_dominant_strategies, StrategySeries};

use crate::config::SimConfig;
use crate::error::Result;
use crate::market::{BankStatus, CycleEvents, MarketState, StrategyKey};
use crate::rates::{RateSeries, YearMonth};

/// Per-cycle series, one entry per simulated month.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricSeries {
    pub month: Vec<YearMonth>,
    pub base_rate: Vec<f64>,
    pub active: Vec<usize>,
    pub assisted: Vec<usize>,
    pub bankrupt: Vec<usize>,
    pub failures: Vec<usize>,
    pub assistances: Vec<usize>,
    pub distinct_strategies: Vec<usize>,
    pub dominant_share: Vec<f64>,
    pub total_deposits: Vec<f64>,
    pub total_capital: Vec<f64>,
    pub total_wealth: Vec<f64>,
    pub mean_return_expectation: Vec<f64>,
}

/// Everything recorded about one seeded realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub seed: u64,
    pub evolution: bool,
    pub start: YearMonth,
    pub end: YearMonth,
    pub initial_banks: usize,
    pub metrics: MetricSeries,
    pub crisis_months: Vec<YearMonth>,
    /// 0-based cycle index of each crisis start.
    pub crisis_cycles: Vec<usize>,
    pub strategy_history: Vec<StrategySeries>,
    #[serde(skip)]
    pub snapshots: Vec<Snapshot>,
}

impl RunResult {
    pub fn crisis_count(&self) -> usize {
        self.crisis_cycles.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run result serializes")
    }
}

/// A market state bound to its calendar and metric recorders.
pub struct Simulation {
    state: MarketState,
    start: YearMonth,
    end: YearMonth,
    metrics: MetricSeries,
    live_at_start: Vec<usize>,
    censuses: Vec<Vec<(StrategyKey, usize)>>,
    snapshots: Vec<Snapshot>,
}

impl Simulation {
    pub fn new(config: &SimConfig, rates: &RateSeries, seed: u64) -> Result<Self> {
        config.validate()?;
        let (start, end) = (config.run.start, config.run.end);
        let window = rates.window(start, end)?;
        let state = MarketState::new(config.clone(), window, seed)?;
        Ok(Self {
            state,
            start,
            end,
            metrics: MetricSeries::default(),
            live_at_start: Vec::new(),
            censuses: Vec::new(),
            snapshots: Vec::new(),
        })
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut MarketState {
        &mut self.state
    }

    /// Calendar month of the next cycle.
    pub fn month(&self) -> YearMonth {
        self.start.plus_months(self.state.cycle() as i64)
    }

    pub fn is_finished(&self) -> bool {
        self.month() > self.end
    }

    /// Runs one cycle and records its metrics.
    pub fn step(&mut self) -> Result<CycleEvents> {
        let month = self.month();
        let live = self.state.banks.iter().filter(|b| b.is_live()).count();
        let ir = self.state.rates()[self.state.cycle() as usize];
        let events = self.state.run_cycle()?;
        self.live_at_start.push(live);
        self.record(month, ir, &events);
        let cfg = self.state.config();
        if cfg.run.snapshot_months.contains(&month) {
            let fraction = cfg.run.snapshot_fraction;
            self.snapshots.push(export_snapshot(&self.state, month, fraction));
        }
        Ok(events)
    }

    fn record(&mut self, month: YearMonth, ir: f64, events: &CycleEvents) {
        let banks = &self.state.banks;
        let count = |s: BankStatus| banks.iter().filter(|b| b.status == s).count();
        let census = strategies::census(banks);
        let live: usize = census.iter().map(|c| c.1).sum();
        let dom = strategies::dominant(&census).map_or(0, |d| d.1);
        let investors = &self.state.investors;
        let m = &mut self.metrics;
        m.month.push(month);
        m.base_rate.push(ir);
        m.active.push(count(BankStatus::Active));
        m.assisted.push(count(BankStatus::Assisted));
        m.bankrupt.push(count(BankStatus::Bankrupt));
        m.failures.push(events.failures.len());
        m.assistances.push(events.assistances.len());
        m.distinct_strategies.push(census.len());
        m.dominant_share.push(if live == 0 { 0.0 } else { dom as f64 / live as f64 });
        m.total_deposits.push(banks.iter().map(|b| b.total_deposits).sum());
        m.total_capital.push(banks.iter().filter(|b| b.is_live()).map(|b| b.capital).sum());
        m.total_wealth.push(investors.iter().map(|i| i.wealth).sum());
        m.mean_return_expectation
            .push(investors.iter().map(|i| i.return_expectation).sum::<f64>() / investors.len().max(1) as f64);
        self.censuses.push(census);
    }

    pub fn run_to_end(mut self) -> Result<RunResult> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> RunResult {
        let cfg = self.state.config();
        let events: Vec<usize> = self
            .metrics
            .failures
            .iter()
            .zip(&self.metrics.assistances)
            .map(|(f, a)| f + a)
            .collect();
        let crisis_cycles = detect_crises(
            &events,
            &self.live_at_start,
            cfg.run.crisis_threshold,
            cfg.run.crisis_window as usize,
        );
        RunResult {
            seed: self.state.seed(),
            evolution: cfg.evolution.enabled,
            start: self.start,
            end: self.end,
            initial_banks: self.state.banks.len(),
            crisis_months: crisis_cycles.iter().map(|&c| self.start.plus_months(c as i64)).collect(),
            crisis_cycles,
            strategy_history: track_dominant_strategies(&self.censuses),
            metrics: self.metrics,
            snapshots: self.snapshots,
        }
    }
}

/// Runs one seeded realization over the configured horizon.
pub fn simulate(config: &SimConfig, rates: &RateSeries, seed: u64) -> Result<RunResult> {
    Simulation::new(config, rates, seed)?.run_to_end()
}

/// Loads the configured rate file, or the bundled US series.
pub fn load_rates(config: &SimConfig) -> Result<RateSeries> {
    match &config.run.rates {
        Some(path) => RateSeries::from_path(path),
        None => Ok(RateSeries::bundled_us()),
    }
}

/// Distinct strategies per cycle never increase.
pub fn is_non_increasing(xs: &[usize]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

/// Set of strategy keys of live banks.
pub fn live_strategies(state: &MarketState) -> BTreeSet<StrategyKey> {
    state.banks.iter().filter(|b| b.is_live()).map(|b| b.strategy()).collect()
}
