//! Simulation configuration.
//!
//! Every model constant is a named key whose default is the calibrated value
//! used throughout the crate. A config file only needs the keys it changes;
//! `key.path=value` overrides are applied on top of the parsed file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::YearMonth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub market: MarketParams,
    pub population: PopulationParams,
    pub evolution: EvolutionParams,
    pub run: RunParams,
}

/// Constants of the monthly market cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketParams {
    /// Investment period in months; deposits and loans mature after it.
    pub investment_period: u32,
    /// Investor memory in months for the downside-risk window.
    pub memory: u32,
    /// Concentration limit; an investor's new funds split into `1/CL` tranches.
    pub concentration_limit: f64,
    /// Tranche thickness; a bank's new lending splits into `1/TT` tranches.
    pub tranche_thickness: f64,
    pub prime_rate: f64,
    pub volatility: f64,
    pub recovery: f64,
    /// Spread earned on interbank placements and paid on capital.
    pub interbank_spread: f64,
    /// Scale `c` in `mu = ln(1 + ir) * c`.
    pub mu_scale: f64,
    /// Variance of the log-normal loan performance distribution.
    pub sigma2: f64,
    pub min_capital_ratio: f64,
    pub dividend_ratio: f64,
    pub investor_distribution_ratio: f64,
    /// Deposit acceptance probability indexed by `|RT - AG|`; longer distances accept nothing.
    pub match_probabilities: Vec<f64>,
    pub n_clusters: usize,
    /// Rating bands from the capital-ratio ranking, before the one-notch adjustment.
    pub rating_bands: u8,
    pub appetite_groups: u8,
    /// Width of the Gaussian lending kernel, in percentage points.
    pub lending_sigma_pp: f64,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            investment_period: 48,
            memory: 24,
            concentration_limit: 0.10,
            tranche_thickness: 0.10,
            prime_rate: 0.03,
            volatility: 0.20,
            recovery: 0.40,
            interbank_spread: 0.01,
            mu_scale: 2.71,
            sigma2: 0.5,
            min_capital_ratio: 0.08,
            dividend_ratio: 0.95,
            investor_distribution_ratio: 0.90,
            match_probabilities: vec![0.80, 0.20, 0.10],
            n_clusters: 41,
            rating_bands: 10,
            appetite_groups: 11,
            lending_sigma_pp: 1.0,
        }
    }
}

/// Initial populations. None of these are fixed by the model itself; they are
/// the calibration knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationParams {
    pub n_banks: usize,
    pub n_investors: usize,
    /// Median initial bank capital (log-normal).
    pub capital_median: f64,
    pub capital_sigma: f64,
    /// Median initial investor wealth (log-normal).
    pub wealth_median: f64,
    pub wealth_sigma: f64,
    pub tcr_range: [f64; 2],
    pub sr_range: [f64; 2],
    pub bn_range: [f64; 2],
    pub rex_range: [f64; 2],
    /// Aggregate loan-cluster capacity as a multiple of aggregate investor wealth.
    pub market_capacity_ratio: f64,
}

impl Default for PopulationParams {
    fn default() -> Self {
        Self {
            n_banks: 250,
            n_investors: 2500,
            capital_median: 100.0,
            capital_sigma: 0.5,
            wealth_median: 50.0,
            wealth_sigma: 0.5,
            tcr_range: [0.12, 0.25],
            sr_range: [0.3, 0.6],
            bn_range: [0.0, 0.5],
            rex_range: [0.0, 0.01],
            market_capacity_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionParams {
    pub enabled: bool,
    /// Dissemination amplitude `a`.
    pub a: f64,
    /// Dissemination rate sensitivity `b`.
    pub b: f64,
    pub benchmark_centile: f64,
    pub infection_rate_annual: f64,
    /// Chance per cycle that a below-benchmark investor raises its expectation.
    pub dissemination_probability: f64,
    /// Months of realized returns used to rank investors.
    pub return_window: u32,
    /// Months of net income used to pick the most profitable bank.
    pub profit_window: u32,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            enabled: true,
            a: 0.02891,
            b: -0.2168,
            benchmark_centile: 0.40,
            infection_rate_annual: 0.01,
            dissemination_probability: 0.05,
            return_window: 24,
            profit_window: 12,
        }
    }
}

impl EvolutionParams {
    /// Monthly infection probability compounding to the annual rate.
    pub fn monthly_infection_probability(&self) -> f64 {
        1.0 - (1.0 - self.infection_rate_annual).powf(1.0 / 12.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub start: YearMonth,
    pub end: YearMonth,
    /// Fraction of banks failing or assisted within the window that marks a crisis.
    pub crisis_threshold: f64,
    pub crisis_window: u32,
    pub snapshot_months: Vec<YearMonth>,
    pub snapshot_fraction: f64,
    /// Base-rate CSV. `None` uses the bundled US series.
    pub rates: Option<PathBuf>,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            start: YearMonth::new(1973, 1),
            end: YearMonth::new(2011, 12),
            crisis_threshold: 0.02,
            crisis_window: 12,
            snapshot_months: [1975, 1985, 1995, 2005]
                .into_iter()
                .map(|y| YearMonth::new(y, 1))
                .collect(),
            snapshot_fraction: 0.01,
            rates: None,
        }
    }
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || v.is_nan() {
        return Err(Error::Config(format!("{name} = {v} is not a fraction in [0, 1]")));
    }
    Ok(())
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0] <= r[1]) {
        return Err(Error::Config(format!("{name} = {r:?} is not an ordered range")));
    }
    Ok(())
}

/// `1/x` as an integer count, if `x` divides one evenly.
pub(crate) fn whole_reciprocal(x: f64) -> Option<usize> {
    if x <= 0.0 {
        return None;
    }
    let n = (1.0 / x).round();
    ((n * x - 1.0).abs() < 1e-9 && n >= 1.0).then_some(n as usize)
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `section.key=value` overrides. Values are parsed as TOML
    /// literals, falling back to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let cfg = apply_overrides(self, overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.market;
        for (name, v) in [
            ("market.concentration_limit", m.concentration_limit),
            ("market.tranche_thickness", m.tranche_thickness),
            ("market.prime_rate", m.prime_rate),
            ("market.volatility", m.volatility),
            ("market.recovery", m.recovery),
            ("market.interbank_spread", m.interbank_spread),
            ("market.min_capital_ratio", m.min_capital_ratio),
            ("market.dividend_ratio", m.dividend_ratio),
            ("market.investor_distribution_ratio", m.investor_distribution_ratio),
            ("evolution.benchmark_centile", self.evolution.benchmark_centile),
            ("evolution.infection_rate_annual", self.evolution.infection_rate_annual),
            (
                "evolution.dissemination_probability",
                self.evolution.dissemination_probability,
            ),
            ("run.crisis_threshold", self.run.crisis_threshold),
            ("run.snapshot_fraction", self.run.snapshot_fraction),
        ] {
            check_fraction(name, v)?;
        }
        for (i, p) in m.match_probabilities.iter().enumerate() {
            check_fraction(&format!("market.match_probabilities[{i}]"), *p)?;
        }
        if m.investment_period == 0 || !m.investment_period.is_multiple_of(12) {
            return Err(Error::Config(format!(
                "market.investment_period = {} must be a positive multiple of 12",
                m.investment_period
            )));
        }
        if m.memory == 0 {
            return Err(Error::Config("market.memory must be positive".into()));
        }
        if whole_reciprocal(m.concentration_limit).is_none() {
            return Err(Error::Config(format!(
                "market.concentration_limit = {} does not divide 1 evenly",
                m.concentration_limit
            )));
        }
        if whole_reciprocal(m.tranche_thickness).is_none() {
            return Err(Error::Config(format!(
                "market.tranche_thickness = {} does not divide 1 evenly",
                m.tranche_thickness
            )));
        }
        if m.n_clusters == 0 || m.rating_bands == 0 || m.appetite_groups == 0 {
            return Err(Error::Config("cluster, rating and appetite counts must be positive".into()));
        }
        if m.sigma2 <= 0.0 || m.lending_sigma_pp <= 0.0 {
            return Err(Error::Config("variances must be positive".into()));
        }
        let p = &self.population;
        if p.n_banks == 0 || p.n_investors == 0 {
            return Err(Error::Config("populations must be non-empty".into()));
        }
        check_range("population.tcr_range", p.tcr_range)?;
        check_range("population.sr_range", p.sr_range)?;
        check_range("population.bn_range", p.bn_range)?;
        check_range("population.rex_range", p.rex_range)?;
        if p.tcr_range[0] <= 0.0 || p.tcr_range[1] > 1.0 {
            return Err(Error::Config("population.tcr_range must lie in (0, 1]".into()));
        }
        if p.bn_range[1] >= 1.0 || p.bn_range[0] < 0.0 {
            return Err(Error::Config("population.bn_range must lie in [0, 1)".into()));
        }
        if p.capital_median <= 0.0 || p.wealth_median <= 0.0 {
            return Err(Error::Config("initial capital and wealth medians must be positive".into()));
        }
        let e = &self.evolution;
        if !(e.benchmark_centile > 0.0 && e.benchmark_centile < 1.0) {
            return Err(Error::Config("evolution.benchmark_centile must lie in (0, 1)".into()));
        }
        if self.run.end < self.run.start {
            return Err(Error::Config("run.end precedes run.start".into()));
        }
        if self.run.crisis_window == 0 {
            return Err(Error::Config("run.crisis_window must be positive".into()));
        }
        Ok(())
    }

    /// Number of tranches an investor's new funds are split into.
    pub fn investor_tranches(&self) -> usize {
        whole_reciprocal(self.market.concentration_limit).unwrap_or(1)
    }

    /// Number of tranches a bank's new lending is split into.
    pub fn lending_tranches(&self) -> usize {
        whole_reciprocal(self.market.tranche_thickness).unwrap_or(1)
    }
}

/// Re-decodes `value` with `key.path=value` overrides applied to its TOML
/// form. Unknown keys are rejected when `T` denies them.
pub fn apply_overrides<T, S>(value: &T, overrides: &[S]) -> Result<T>
where
    T: Serialize + serde::de::DeserializeOwned + Clone,
    S: AsRef<str>,
{
    if overrides.is_empty() {
        return Ok(value.clone());
    }
    let mut root = toml::Table::try_from(value)
        .map_err(|e| Error::Config(format!("cannot encode config: {e}")))?;
    for raw in overrides {
        let raw = raw.as_ref();
        let (key, text) = raw
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{raw}` is not key=value")))?;
        let path: Vec<&str> = key.trim().split('.').collect();
        set_path(&mut root, &path, parse_literal(text.trim()))
            .map_err(|msg| Error::Config(format!("override `{raw}`: {msg}")))?;
    }
    root.try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
}

fn parse_literal(text: &str) -> toml::Value {
    let wrapped = format!("v = {text}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.to_string())),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

fn set_path(table: &mut toml::Table, path: &[&str], value: toml::Value) -> std::result::Result<(), String> {
    match path {
        [] => Err("empty key".into()),
        [leaf] => {
            table.insert((*leaf).to_string(), value);
            Ok(())
        }
        [head, rest @ ..] => match table
            .entry((*head).to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        {
            toml::Value::Table(inner) => set_path(inner, rest, value),
            _ => Err(format!("`{head}` is not a section")),
        },
    }
}
