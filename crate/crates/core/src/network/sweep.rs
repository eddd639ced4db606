use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::graph::FirmGraph;
use super::lscc::{lscc_masked, lscc_size};
use crate::error::{Error, Result};
use crate::par::{self, Exec};

/// Which firms go first in a targeted removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalOrder {
    /// Largest sales first.
    #[default]
    BySales,
    /// Largest total degree in the intact graph first.
    ByDegree,
}

impl fmt::Display for RemovalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RemovalOrder::BySales => "by-sales",
            RemovalOrder::ByDegree => "by-degree",
        })
    }
}

impl FromStr for RemovalOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sales" | "by-sales" => Ok(RemovalOrder::BySales),
            "degree" | "by-degree" => Ok(RemovalOrder::ByDegree),
            other => Err(Error::Config(format!(
                "unknown removal order `{other}` (expected sales or degree)"
            ))),
        }
    }
}

/// Node indices in removal order, descending by key with ties broken by id.
pub fn removal_sequence(graph: &FirmGraph, order: RemovalOrder) -> Vec<usize> {
    let mut seq: Vec<usize> = (0..graph.len()).collect();
    match order {
        RemovalOrder::BySales => seq.sort_by(|&a, &b| {
            graph
                .firm(b)
                .sales
                .total_cmp(&graph.firm(a).sales)
                .then(a.cmp(&b))
        }),
        RemovalOrder::ByDegree => {
            seq.sort_by(|&a, &b| graph.total_degree(b).cmp(&graph.total_degree(a)).then(a.cmp(&b)))
        }
    }
    seq
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Fraction of nodes removed.
    pub f: f64,
    /// LSCC size as a fraction of all nodes.
    #[serde(rename = "Q")]
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalSweep {
    pub order: RemovalOrder,
    pub step: f64,
    pub nodes: usize,
    pub points: Vec<SweepPoint>,
}

impl RemovalSweep {
    /// Number of removed nodes behind each point.
    pub fn removed_counts(&self) -> Vec<usize> {
        self.points
            .iter()
            .map(|p| (p.f * self.nodes as f64).round() as usize)
            .collect()
    }
}

fn checkpoints(n: usize, step: f64) -> Vec<usize> {
    let mut ks = vec![0usize];
    let mut i = 1u64;
    loop {
        let k = ((i as f64) * step * n as f64).round() as usize;
        if k >= n {
            break;
        }
        if k > *ks.last().expect("non-empty") {
            ks.push(k);
        }
        i += 1;
    }
    if n > 0 {
        ks.push(n);
    }
    ks
}

fn alive_after(n: usize, seq: &[usize], k: usize) -> Vec<bool> {
    let mut alive = vec![true; n];
    for &v in &seq[..k] {
        alive[v] = false;
    }
    alive
}

/// Removes nodes one at a time in `order`, recording `(f, Q)` every `step`
/// fraction of the nodes and once more when the graph is empty. A lone node
/// is not a cluster, so `Q` is zero once no two firms reach each other.
pub fn removal_sweep(
    graph: &FirmGraph,
    order: RemovalOrder,
    step: f64,
    exec: Exec,
) -> Result<RemovalSweep> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("sweep step {step} must lie in (0, 1]")));
    }
    let n = graph.len();
    let seq = removal_sequence(graph, order);
    let ks = checkpoints(n, step);
    let sizes = par::map_indexed(exec, &ks, |_, &k| {
        if k == n {
            return 0;
        }
        match lscc_size(graph, Some(&alive_after(n, &seq, k))) {
            s if s >= 2 => s,
            _ => 0,
        }
    });
    let denom = n.max(1) as f64;
    let points = ks
        .iter()
        .zip(sizes)
        .map(|(&k, s)| SweepPoint {
            f: k as f64 / denom,
            q: s as f64 / denom,
        })
        .collect();
    Ok(RemovalSweep {
        order,
        step,
        nodes: n,
        points,
    })
}

/// The LSCC left after removing the first `k` nodes of the order, empty
/// when it would be a single node.
pub fn lscc_after_removal(graph: &FirmGraph, order: RemovalOrder, k: usize) -> Vec<usize> {
    let n = graph.len();
    let seq = removal_sequence(graph, order);
    let members = lscc_masked(graph, Some(&alive_after(n, &seq, k.min(n))));
    if members.len() >= 2 {
        members
    } else {
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::graph::{Firm, Sector};

    fn complete(n: usize) -> FirmGraph {
        let firms = (0..n)
            .map(|i| Firm {
                id: i as u64,
                sales: (n - i) as f64,
                sector: Sector::Other,
                region: "x".into(),
            })
            .collect();
        let edges = (0..n)
            .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        FirmGraph::new(firms, edges).unwrap()
    }

    #[test]
    fn checkpoints_cover_both_ends() {
        assert_eq!(checkpoints(10, 0.25), vec![0, 3, 5, 8, 10]);
        assert_eq!(checkpoints(0, 0.1), vec![0]);
        assert_eq!(checkpoints(3, 0.01), vec![0, 1, 2, 3]);
    }

    #[test]
    fn complete_digraph_loses_one_per_removal() {
        let n = 12;
        let s = removal_sweep(&complete(n), RemovalOrder::BySales, 1.0 / n as f64, Exec::Sequential)
            .unwrap();
        assert_eq!(s.points.len(), n + 1);
        for (k, p) in s.points.iter().enumerate().take(n - 1) {
            assert!((p.q - (n - k) as f64 / n as f64).abs() < 1e-12);
        }
        assert_eq!(s.points[n - 1].q, 0.0);
        assert_eq!(s.points[n].q, 0.0);
    }

    #[test]
    fn cycle_collapses_at_first_removal() {
        let firms = (0..3)
            .map(|i| Firm {
                id: i,
                sales: 1.0,
                sector: Sector::Other,
                region: "x".into(),
            })
            .collect();
        let g = FirmGraph::new(firms, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        let s = removal_sweep(&g, RemovalOrder::ByDegree, 0.005, Exec::Sequential).unwrap();
        let q: Vec<f64> = s.points.iter().map(|p| p.q).collect();
        assert_eq!(q, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn sales_order_breaks_ties_by_id() {
        let mut g = complete(4);
        g = {
            let mut firms = g.firms().to_vec();
            firms[3].sales = firms[0].sales;
            FirmGraph::new(firms, vec![]).unwrap()
        };
        assert_eq!(removal_sequence(&g, RemovalOrder::BySales), vec![0, 3, 1, 2]);
    }

    #[test]
    fn rejects_bad_step() {
        assert!(removal_sweep(&complete(3), RemovalOrder::ByDegree, 0.0, Exec::Sequential).is_err());
    }
}
