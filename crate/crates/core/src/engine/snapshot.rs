//! Sampled bank/investor network snapshots.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::seq::index::sample;
use serde::Serialize;

use crate::error::Result;
use crate::market::{MarketState, RngOp, StrategyKey};
use crate::rates::YearMonth;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotInvestor {
    pub id: usize,
    pub wealth: f64,
    pub risk_appetite: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotBank {
    pub id: usize,
    pub deposits: f64,
    /// 1 for the most common strategy among live banks, 2 for the next, and so on.
    pub strategy_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotEdge {
    pub investor: usize,
    pub bank: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub month: YearMonth,
    pub investors: Vec<SnapshotInvestor>,
    pub banks: Vec<SnapshotBank>,
    pub edges: Vec<SnapshotEdge>,
}

fn sample_ids(rng: &mut impl rand::Rng, n: usize, fraction: f64) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
    let mut ids = sample(rng, n, k).into_vec();
    ids.sort_unstable();
    ids
}

/// Samples `fraction` of the investors and of the live banks using the run's
/// snapshot stream for the state's last completed cycle, and keeps the live
/// deposit edges between sampled entities.
pub fn export_snapshot(state: &MarketState, month: YearMonth, fraction: f64) -> Snapshot {
    let cycle = state.cycle().saturating_sub(1);
    let mut rng = crate::market::state_rng(state.seed(), cycle, RngOp::Snapshot);

    let live: Vec<usize> = state.banks.iter().filter(|b| b.is_live()).map(|b| b.id).collect();
    let inv_ids = sample_ids(&mut rng, state.investors.len(), fraction);
    let bank_ids: Vec<usize> = sample_ids(&mut rng, live.len(), fraction)
        .into_iter()
        .map(|i| live[i])
        .collect();

    let mut counts: BTreeMap<StrategyKey, usize> = BTreeMap::new();
    for &b in &live {
        *counts.entry(state.banks[b].strategy()).or_default() += 1;
    }
    let mut ranked: Vec<(StrategyKey, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let rank: HashMap<StrategyKey, usize> = ranked.iter().enumerate().map(|(i, s)| (s.0, i + 1)).collect();

    let investors = inv_ids
        .iter()
        .map(|&i| SnapshotInvestor {
            id: i,
            wealth: state.investors[i].wealth,
            risk_appetite: state.investors[i].risk_appetite,
        })
        .collect();
    let banks = bank_ids
        .iter()
        .map(|&b| SnapshotBank {
            id: b,
            deposits: state.banks[b].total_deposits,
            strategy_rank: rank[&state.banks[b].strategy()],
        })
        .collect();

    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for d in state.live_deposits() {
        let (i, b) = (d.investor as usize, d.bank as usize);
        if inv_ids.binary_search(&i).is_ok() && bank_ids.binary_search(&b).is_ok() {
            *edges.entry((i, b)).or_default() += d.amount;
        }
    }
    Snapshot {
        month,
        investors,
        banks,
        edges: edges
            .into_iter()
            .map(|((investor, bank), amount)| SnapshotEdge { investor, bank, amount })
            .collect(),
    }
}

impl Snapshot {
    /// Long-format CSV: `kind,id,size,attr,edge_src,edge_dst`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "id", "size", "attr", "edge_src", "edge_dst"])?;
        for i in &self.investors {
            w.write_record(["investor", &i.id.to_string(), &i.wealth.to_string(), &i.risk_appetite.to_string(), "", ""])?;
        }
        for b in &self.banks {
            w.write_record(["bank", &b.id.to_string(), &b.deposits.to_string(), &b.strategy_rank.to_string(), "", ""])?;
        }
        for (k, e) in self.edges.iter().enumerate() {
            w.write_record(["edge", &k.to_string(), &e.amount.to_string(), "", &e.investor.to_string(), &e.bank.to_string()])?;
        }
        w.flush().map_err(|e| crate::error::Error::io("snapshot csv", e))?;
        Ok(())
    }
}
