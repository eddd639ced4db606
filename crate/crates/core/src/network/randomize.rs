use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::FirmGraph;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SwapStats {
    pub attempted: u64,
    pub accepted: u64,
}

/// Default swap budget: ten attempts per edge.
pub fn default_swaps(graph: &FirmGraph) -> u64 {
    10 * graph.edge_count() as u64
}

#[inline]
fn key(a: u32, b: u32) -> u64 {
    ((a as u64) << 32) | b as u64
}

/// Degree-preserving null model. Each attempt picks edges `A -> B` and
/// `C -> D` and rewires them to `A -> D` and `C -> B`, skipping the attempt
/// when that would create a self-loop or a duplicate edge.
pub fn randomize(graph: &FirmGraph, n_swaps: u64, seed: u64) -> Result<(FirmGraph, SwapStats)> {
    let mut edges = graph.edges().to_vec();
    let mut stats = SwapStats {
        attempted: n_swaps,
        accepted: 0,
    };
    let m = edges.len();
    if m < 2 || n_swaps == 0 {
        return Ok((graph.clone(), stats));
    }
    let mut present: HashSet<u64> = edges.iter().map(|&(a, b)| key(a, b)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_swaps {
        let i = rng.random_range(0..m);
        let j = rng.random_range(0..m);
        if i == j {
            continue;
        }
        let (a, b) = edges[i];
        let (c, d) = edges[j];
        if a == d || c == b || present.contains(&key(a, d)) || present.contains(&key(c, b)) {
            continue;
        }
        present.remove(&key(a, b));
        present.remove(&key(c, d));
        present.insert(key(a, d));
        present.insert(key(c, b));
        edges[i] = (a, d);
        edges[j] = (c, b);
        stats.accepted += 1;
    }
    Ok((graph.with_edges(edges)?, stats))
}
