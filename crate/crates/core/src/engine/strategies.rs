//! Strategy census and dominant-strategy series.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::market::{Bank, StrategyKey};

/// Count of live banks per strategy, ordered by key.
pub fn census(banks: &[Bank]) -> Vec<(StrategyKey, usize)> {
    let mut counts: BTreeMap<StrategyKey, usize> = BTreeMap::new();
    for b in banks.iter().filter(|b| b.is_live()) {
        *counts.entry(b.strategy()).or_default() += 1;
    }
    counts.into_iter().collect()
}

/// Most common strategy of a census, smallest key on ties.
pub fn dominant(census: &[(StrategyKey, usize)]) -> Option<(StrategyKey, usize)> {
    census
        .iter()
        .copied()
        .fold(None, |best, cur| match best {
            Some((_, n)) if n >= cur.1 => best,
            _ => Some(cur),
        })
}

/// Share series of one strategy that was dominant at some point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySeries {
    pub strategy: StrategyKey,
    pub label: String,
    /// Share of live banks holding this strategy, one value per cycle.
    pub shares: Vec<f64>,
    /// Inclusive `(first, last)` cycle ranges during which it was dominant.
    pub dominant_intervals: Vec<(usize, usize)>,
}

/// Builds the share series of every strategy that is ever the most common.
pub fn track_dominant_strategies(censuses: &[Vec<(StrategyKey, usize)>]) -> Vec<StrategySeries> {
    let leaders: Vec<Option<StrategyKey>> = censuses.iter().map(|c| dominant(c).map(|d| d.0)).collect();
    let ever: BTreeSet<StrategyKey> = leaders.iter().flatten().copied().collect();
    ever.into_iter()
        .map(|key| {
            let shares = censuses
                .iter()
                .map(|c| {
                    let live: usize = c.iter().map(|e| e.1).sum();
                    let n = c.iter().find(|e| e.0 == key).map_or(0, |e| e.1);
                    if live == 0 {
                        0.0
                    } else {
                        n as f64 / live as f64
                    }
                })
                .collect();
            let mut dominant_intervals = Vec::new();
            let mut open: Option<usize> = None;
            for (t, lead) in leaders.iter().enumerate() {
                let is = *lead == Some(key);
                match (is, open) {
                    (true, None) => open = Some(t),
                    (false, Some(s)) => {
                        dominant_intervals.push((s, t - 1));
                        open = None;
                    }
                    _ => {}
                }
            }
            if let Some(s) = open {
                dominant_intervals.push((s, leaders.len() - 1));
            }
            StrategySeries {
                strategy: key,
                label: key.label(),
                shares,
                dominant_intervals,
            }
        })
        .collect()
}
