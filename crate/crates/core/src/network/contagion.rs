//! Cascading failure from the best-connected firm.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::FirmGraph;
use crate::error::{Error, Result};
use crate::par::{self, Exec};

/// The node with the most distinct neighbours, smallest id on ties.
pub fn cascade_origin(graph: &FirmGraph) -> Option<usize> {
    (0..graph.len()).max_by(|&a, &b| {
        graph
            .neighbors(a)
            .len()
            .cmp(&graph.neighbors(b).len())
            .then(b.cmp(&a))
    })
}

/// Number of firms removed by one cascade.
pub fn cascade_size<R: Rng>(graph: &FirmGraph, origin: usize, p: f64, rng: &mut R) -> usize {
    let mut removed = vec![false; graph.len()];
    let mut queue = VecDeque::new();
    removed[origin] = true;
    queue.push_back(origin);
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &w in graph.neighbors(u) {
            let w = w as usize;
            if !removed[w] && rng.random::<f64>() < p {
                removed[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count
}

/// Removes the best-connected firm, then each neighbour of a removed firm with
/// probability `p`, breadth first. Returns the removed fraction.
pub fn contagion_trial(graph: &FirmGraph, p: f64, seed: u64) -> f64 {
    let Some(origin) = cascade_origin(graph) else {
        return 0.0;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cascade_size(graph, origin, p, &mut rng) as f64 / graph.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContagionOptions {
    pub trials: usize,
    /// A cascade spans the network when it removes at least this fraction.
    pub spanning_fraction: f64,
    /// Probability of spanning that defines the threshold.
    pub crossing: f64,
    pub bisection_steps: usize,
    pub seed: u64,
}

impl Default for ContagionOptions {
    fn default() -> Self {
        Self {
            trials: 200,
            spanning_fraction: 0.5,
            crossing: 0.5,
            bisection_steps: 8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanningPoint {
    pub p: f64,
    pub spanning_probability: f64,
    pub mean_removed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContagionEstimate {
    pub p_c: f64,
    /// True when no grid point reached the crossing; `p_c` is then the top
    /// of the grid and only a lower bound.
    pub unbounded: bool,
    pub trials: usize,
    pub spanning_fraction: f64,
    pub crossing: f64,
    pub grid: Vec<SpanningPoint>,
    pub bisection: Vec<SpanningPoint>,
}

fn mix(seed: u64, p: f64) -> u64 {
    let mut z = seed ^ p.to_bits().wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn spanning_at(
    graph: &FirmGraph,
    origin: usize,
    p: f64,
    opts: &ContagionOptions,
    exec: Exec,
) -> SpanningPoint {
    let n = graph.len() as f64;
    let need = (opts.spanning_fraction * n).ceil().max(1.0) as usize;
    let base = mix(opts.seed, p);
    let sizes = par::map_range(exec, opts.trials, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(base);
        rng.set_stream(t as u64);
        cascade_size(graph, origin, p, &mut rng)
    });
    let spans = sizes.iter().filter(|&&s| s >= need).count();
    SpanningPoint {
        p,
        spanning_probability: spans as f64 / opts.trials as f64,
        mean_removed: sizes.iter().sum::<usize>() as f64 / (opts.trials as f64 * n),
    }
}

/// Estimates the propagation probability at which cascades start to span the
/// network: the first grid point whose spanning probability reaches
/// `crossing`, refined by bisection against the grid point before it.
pub fn estimate_pc(
    graph: &FirmGraph,
    p_grid: &[f64],
    opts: &ContagionOptions,
    exec: Exec,
) -> Result<ContagionEstimate> {
    if opts.trials == 0 {
        return Err(Error::Config("contagion trials must be at least 1".into()));
    }
    if p_grid.is_empty() {
        return Err(Error::Config("the p grid is empty".into()));
    }
    if p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Config("p grid values must lie in [0, 1]".into()));
    }
    if p_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("the p grid must be strictly increasing".into()));
    }
    let mut est = ContagionEstimate {
        p_c: *p_grid.last().expect("non-empty"),
        unbounded: true,
        trials: opts.trials,
        spanning_fraction: opts.spanning_fraction,
        crossing: opts.crossing,
        grid: Vec::new(),
        bisection: Vec::new(),
    };
    let Some(origin) = cascade_origin(graph) else {
        return Ok(est);
    };
    for &p in p_grid {
        let pt = spanning_at(graph, origin, p, opts, exec);
        est.grid.push(pt);
        if pt.spanning_probability >= opts.crossing {
            break;
        }
    }
    let hit = est.grid.len() - 1;
    if est.grid[hit].spanning_probability < opts.crossing {
        return Ok(est);
    }
    est.unbounded = false;
    if hit == 0 {
        est.p_c = p_grid[0];
        return Ok(est);
    }
    let (mut lo, mut hi) = (p_grid[hit - 1], p_grid[hit]);
    for _ in 0..opts.bisection_steps {
        let mid = 0.5 * (lo + hi);
        let pt = spanning_at(graph, origin, mid, opts, exec);
        est.bisection.push(pt);
        if pt.spanning_probability >= opts.crossing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    est.p_c = 0.5 * (lo + hi);
    Ok(est)
}

/// Parses `start:step:end` (inclusive) or a comma-separated list.
pub fn parse_p_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse p grid `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (start, step, end) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || end < start {
            return Err(bad());
        }
        let count = ((end - start) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| (start + i as f64 * step).min(end)).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::graph::{Firm, Sector};

    fn graph(n: usize, edges: &[(usize, usize)]) -> FirmGraph {
        let firms = (0..n)
            .map(|i| Firm {
                id: i as u64,
                sales: 1.0,
                sector: Sector::Other,
                region: "x".into(),
            })
            .collect();
        FirmGraph::new(firms, edges.to_vec()).unwrap()
    }

    #[test]
    fn extremes() {
        let g = graph(6, &[(0, 1), (1, 2), (3, 4)]);
        assert_eq!(cascade_origin(&g), Some(1));
        assert!((contagion_trial(&g, 0.0, 3) - 1.0 / 6.0).abs() < 1e-12);
        assert!((contagion_trial(&g, 1.0, 3) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn edgeless_graph_is_unbounded() {
        let g = graph(10, &[]);
        let est = estimate_pc(&g, &[0.0, 0.5, 1.0], &ContagionOptions::default(), Exec::Sequential)
            .unwrap();
        assert!(est.unbounded);
    }

    #[test]
    fn grid_parsing() {
        let g = parse_p_grid("0:0.05:1").unwrap();
        assert_eq!(g.len(), 21);
        assert!((g[20] - 1.0).abs() < 1e-12);
        assert_eq!(parse_p_grid("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_p_grid("a:b").is_err());
    }
}
