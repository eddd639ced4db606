//! Who is left in the LSCC just before it collapses, and which sectors and
//! regions are over-represented among them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::graph::{FirmGraph, Sector};
use super::sweep::{lscc_after_removal, RemovalOrder, RemovalSweep};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// A cell is flagged when its concentration exceeds the baseline by this factor.
    pub factor: f64,
    /// Cells with fewer survivors are never flagged.
    pub min_survivors: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            factor: 3.0,
            min_survivors: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Survivor {
    pub id: u64,
    pub sales: f64,
    pub sector: Sector,
    pub region: String,
}

/// Survivor share of a group divided by its population share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub sector: Option<Sector>,
    pub region: Option<String>,
    pub survivors: usize,
    pub population: usize,
    pub concentration: f64,
    /// Concentration of the same group in the baseline, never below 1.
    pub baseline: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivorsReport {
    pub order: RemovalOrder,
    pub f_threshold: f64,
    /// Sweep point the survivors were taken from: the last one below the threshold.
    pub f_used: f64,
    pub removed: usize,
    pub survivors: Vec<Survivor>,
    pub by_sector: Vec<Concentration>,
    pub by_region: Vec<Concentration>,
    pub cells: Vec<Concentration>,
}

impl SurvivorsReport {
    pub fn flagged_cells(&self) -> Vec<(Sector, String)> {
        self.cells
            .iter()
            .filter(|c| c.flagged)
            .map(|c| {
                (
                    c.sector.expect("cells carry a sector"),
                    c.region.clone().expect("cells carry a region"),
                )
            })
            .collect()
    }

    fn lookup(&self, sector: Option<Sector>, region: Option<&str>) -> Option<f64> {
        let table = match (sector, region) {
            (Some(_), Some(_)) => &self.cells,
            (Some(_), None) => &self.by_sector,
            _ => &self.by_region,
        };
        table
            .iter()
            .find(|c| c.sector == sector && c.region.as_deref() == region)
            .map(|c| c.concentration)
    }
}

/// Removed count of the last sweep point strictly below `f_threshold`.
pub fn removed_before(sweep: &RemovalSweep, f_threshold: f64) -> (f64, usize) {
    let counts = sweep.removed_counts();
    sweep
        .points
        .iter()
        .zip(counts)
        .take_while(|(p, _)| p.f < f_threshold)
        .last()
        .map(|(p, k)| (p.f, k))
        .unwrap_or((0.0, 0))
}

type Key = (Option<Sector>, Option<String>);

fn tally(graph: &FirmGraph, members: impl Iterator<Item = usize>) -> BTreeMap<Key, usize> {
    let mut out = BTreeMap::new();
    for v in members {
        let f = graph.firm(v);
        for key in [
            (Some(f.sector), None),
            (None, Some(f.region.clone())),
            (Some(f.sector), Some(f.region.clone())),
        ] {
            *out.entry(key).or_insert(0) += 1;
        }
    }
    out
}

/// Attributes the LSCC just below `f_threshold` by sector, region and
/// (sector, region) cell.
///
/// Without a `baseline` every group is compared with 1, the concentration any
/// group has in expectation when attributes are shuffled over the nodes. A
/// `baseline` report, for instance from a rewired copy of the graph, replaces
/// that value group by group.
pub fn survivors_report(
    graph: &FirmGraph,
    sweep: &RemovalSweep,
    f_threshold: f64,
    baseline: Option<&SurvivorsReport>,
    opts: &ReportOptions,
) -> SurvivorsReport {
    let (f_used, removed) = removed_before(sweep, f_threshold);
    let members = lscc_after_removal(graph, sweep.order, removed);
    let n = graph.len().max(1) as f64;
    let total = members.len();
    let population = tally(graph, 0..graph.len());
    let alive = tally(graph, members.iter().copied());

    let mut by_sector = Vec::new();
    let mut by_region = Vec::new();
    let mut cells = Vec::new();
    for ((sector, region), &pop) in &population {
        let surv = alive.get(&(*sector, region.clone())).copied().unwrap_or(0);
        let concentration = if total == 0 {
            0.0
        } else {
            (surv as f64 / total as f64) / (pop as f64 / n)
        };
        let base = baseline
            .and_then(|b| b.lookup(*sector, region.as_deref()))
            .unwrap_or(1.0)
            .max(1.0);
        let row = Concentration {
            sector: *sector,
            region: region.clone(),
            survivors: surv,
            population: pop,
            concentration,
            baseline: base,
            flagged: surv >= opts.min_survivors && concentration > opts.factor * base,
        };
        match (sector, region) {
            (Some(_), Some(_)) => cells.push(row),
            (Some(_), None) => by_sector.push(row),
            _ => by_region.push(row),
        }
    }
    let survivors = members
        .iter()
        .map(|&v| {
            let f = graph.firm(v);
            Survivor {
                id: f.id,
                sales: f.sales,
                sector: f.sector,
                region: f.region.clone(),
            }
        })
        .collect();
    SurvivorsReport {
        order: sweep.order,
        f_threshold,
        f_used,
        removed,
        survivors,
        by_sector,
        by_region,
        cells,
    }
}
