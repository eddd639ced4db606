//! Synthetic firm networks with known planted structure, for tests and demos.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::graph::{Firm, FirmGraph, Sector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedCluster {
    pub size: usize,
    /// Probability of each ordered pair of members being linked.
    pub density: f64,
    pub sector: Sector,
    pub region: String,
    /// Members' sales sit at this percentile of the sales distribution.
    pub sales_percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub nodes: usize,
    /// Mean of in-degree plus out-degree over all nodes.
    pub mean_total_degree: f64,
    /// Tail exponent of the expected-degree distribution. `None` gives every
    /// node the same expected degree, a directed random graph.
    pub degree_exponent: Option<f64>,
    pub sectors: Vec<(Sector, f64)>,
    pub regions: Vec<(String, f64)>,
    /// Log-scale spread of sales around the degree trend.
    pub sales_sigma: f64,
    /// Sales scale as `weight^elasticity`, so big traders are big firms.
    pub sales_degree_elasticity: f64,
    /// Fraction of background edges whose target is drawn among firms of
    /// similar sales rank rather than from the whole population.
    pub assortativity: f64,
    /// Half-width of the sales-rank neighbourhood, as a fraction of all firms.
    pub assortative_window: f64,
    pub planted: Vec<PlantedCluster>,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            nodes: 10_000,
            mean_total_degree: 8.0,
            degree_exponent: Some(2.5),
            sectors: vec![
                (Sector::Construction, 0.15),
                (Sector::Manufacturing, 0.25),
                (Sector::Wholesale, 0.20),
                (Sector::Services, 0.30),
                (Sector::Other, 0.10),
            ],
            regions: (0..10).map(|i| (format!("R{i:02}"), 0.1)).collect(),
            sales_sigma: 1.0,
            sales_degree_elasticity: 1.0,
            assortativity: 0.4,
            assortative_window: 0.02,
            planted: Vec::new(),
        }
    }
}

impl SyntheticParams {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: SyntheticParams =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        Ok(p)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        crate::config::apply_overrides(self, overrides)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GroundTruth {
    /// Member ids of each planted cluster, in parameter order.
    pub clusters: Vec<Vec<u64>>,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub graph: FirmGraph,
    pub truth: GroundTruth,
}

/// Exact counts for shares of `n` by largest remainder.
fn apportion(shares: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = shares.iter().sum();
    let raw: Vec<f64> = shares.iter().map(|s| s / total * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        (raw[b] - raw[b].floor())
            .total_cmp(&(raw[a] - raw[a].floor()))
            .then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn check(params: &SyntheticParams) -> Result<()> {
    let n = params.nodes;
    let gen = |m: String| Err(Error::Generation(m));
    if n == 0 {
        return gen("nodes must be at least 1".into());
    }
    if params.sectors.is_empty() || params.regions.is_empty() {
        return gen("sector and region mixtures must be non-empty".into());
    }
    for w in params.sectors.iter().map(|s| s.1).chain(params.regions.iter().map(|r| r.1)) {
        if !(w >= 0.0 && w.is_finite()) {
            return gen(format!("mixture weight {w} is not a non-negative number"));
        }
    }
    if params.sectors.iter().map(|s| s.1).sum::<f64>() <= 0.0
        || params.regions.iter().map(|r| r.1).sum::<f64>() <= 0.0
    {
        return gen("mixture weights sum to zero".into());
    }
    if !(params.mean_total_degree >= 0.0) {
        return gen("mean_total_degree must be non-negative".into());
    }
    let edges = params.mean_total_degree * n as f64 / 2.0;
    let max_edges = (n as f64) * (n as f64 - 1.0);
    if n >= 2 && edges > 0.5 * max_edges {
        return gen(format!(
            "{edges} edges requested on {n} nodes; a simple digraph this dense cannot be sampled"
        ));
    }
    if let Some(g) = params.degree_exponent {
        if !(g > 2.0) {
            return gen(format!("degree exponent {g} must exceed 2 for a finite mean degree"));
        }
    }
    if !(0.0..=1.0).contains(&params.assortativity)
        || !(0.0..=1.0).contains(&params.assortative_window)
    {
        return gen("assortativity and assortative_window must lie in [0, 1]".into());
    }
    let planted: usize = params.planted.iter().map(|c| c.size).sum();
    if planted > n {
        return gen(format!("{planted} planted members exceed {n} nodes"));
    }
    for c in &params.planted {
        if !(0.0..=1.0).contains(&c.density) || !(0.0..=1.0).contains(&c.sales_percentile) {
            return gen("planted density and sales percentile must lie in [0, 1]".into());
        }
        if !params.regions.iter().any(|r| r.0 == c.region) {
            return gen(format!("planted region `{}` is not among the regions", c.region));
        }
    }
    Ok(())
}

pub fn generate_synthetic(params: &SyntheticParams, seed: u64) -> Result<Synthetic> {
    check(params)?;
    let n = params.nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let weights: Vec<f64> = match params.degree_exponent {
        None => vec![1.0; n],
        Some(g) => {
            let cap = ((n as f64) * params.mean_total_degree).sqrt().max(1.0);
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    (1.0 - u).powf(-1.0 / (g - 1.0)).min(cap)
                })
                .collect()
        }
    };

    let mut sectors: Vec<Sector> = Vec::with_capacity(n);
    for (s, c) in params
        .sectors
        .iter()
        .zip(apportion(&params.sectors.iter().map(|s| s.1).collect::<Vec<_>>(), n))
    {
        sectors.extend(std::iter::repeat_n(s.0, c));
    }
    sectors.shuffle(&mut rng);
    let mut regions: Vec<usize> = Vec::with_capacity(n);
    for (i, c) in apportion(&params.regions.iter().map(|r| r.1).collect::<Vec<_>>(), n)
        .into_iter()
        .enumerate()
    {
        regions.extend(std::iter::repeat_n(i, c));
    }
    regions.shuffle(&mut rng);

    let noise = LogNormal::new(0.0, params.sales_sigma.max(0.0))
        .map_err(|e| Error::Generation(e.to_string()))?;
    let mut sales: Vec<f64> = weights
        .iter()
        .map(|w| 100.0 * w.powf(params.sales_degree_elasticity) * noise.sample(&mut rng))
        .collect();

    let mut truth = GroundTruth::default();
    let mut free: Vec<usize> = (0..n).collect();
    free.shuffle(&mut rng);
    let mut sorted_sales = sales.clone();
    sorted_sales.sort_by(f64::total_cmp);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let jitter = Normal::new(0.0, 0.05).expect("valid normal");
    for c in &params.planted {
        let region = params
            .regions
            .iter()
            .position(|r| r.0 == c.region)
            .expect("checked above");
        let members: Vec<usize> = free.split_off(free.len() - c.size);
        let anchor = if n == 0 {
            0.0
        } else {
            let at = (c.sales_percentile * (n - 1) as f64).round() as usize;
            sorted_sales[at]
        };
        for &v in &members {
            sectors[v] = c.sector;
            regions[v] = region;
            sales[v] = anchor * (1.0_f64 + jitter.sample(&mut rng)).max(0.5);
        }
        let mut ids: Vec<u64> = members.iter().map(|&v| v as u64 + 1).collect();
        ids.sort_unstable();
        truth.clusters.push(ids);
        groups.push(members);
    }

    let mut present: HashSet<(u32, u32)> = HashSet::new();
    let target = (params.mean_total_degree * n as f64 / 2.0).round() as usize;
    if target > 0 && n >= 2 {
        let pick = WeightedIndex::new(&weights).map_err(|e| Error::Generation(e.to_string()))?;
        let mut by_sales: Vec<usize> = (0..n).collect();
        by_sales.sort_by(|&a, &b| sales[a].total_cmp(&sales[b]).then(a.cmp(&b)));
        let mut rank = vec![0usize; n];
        for (r, &v) in by_sales.iter().enumerate() {
            rank[v] = r;
        }
        let half = ((params.assortative_window * n as f64).round() as usize).max(1);
        let budget = 50 * target + 1000;
        let mut tries = 0usize;
        while present.len() < target {
            tries += 1;
            if tries > budget {
                return Err(Error::Generation(format!(
                    "placed {} of {target} edges before the sampling budget ran out",
                    present.len()
                )));
            }
            let a = pick.sample(&mut rng);
            let b = if rng.random::<f64>() < params.assortativity {
                let r = rank[a];
                let lo = r.saturating_sub(half);
                let hi = (r + half).min(n - 1);
                by_sales[rng.random_range(lo..=hi)]
            } else {
                pick.sample(&mut rng)
            };
            if a != b {
                present.insert((a as u32, b as u32));
            }
        }
    }

    for (c, members) in params.planted.iter().zip(&groups) {
        for &a in members {
            for &b in members {
                if a != b && rng.random::<f64>() < c.density {
                    present.insert((a as u32, b as u32));
                }
            }
        }
    }

    let firms: Vec<Firm> = (0..n)
        .map(|v| Firm {
            id: v as u64 + 1,
            sales: sales[v],
            sector: sectors[v],
            region: params.regions[regions[v]].0.clone(),
        })
        .collect();
    let edges: Vec<(u32, u32)> = present.into_iter().collect();
    Ok(Synthetic {
        graph: FirmGraph::from_sorted(firms, edges)?,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(&[0.15, 0.25, 0.2, 0.3, 0.1], 1000), vec![150, 250, 200, 300, 100]);
        assert_eq!(apportion(&[1.0, 1.0, 1.0], 10).iter().sum::<usize>(), 10);
    }

    #[test]
    fn params_take_overrides() {
        let p = SyntheticParams::default()
            .with_overrides(&["nodes=200", "degree_exponent=3.0"])
            .unwrap();
        assert_eq!(p.nodes, 200);
        assert_eq!(p.degree_exponent, Some(3.0));
        let text = toml::to_string(&p).unwrap();
        assert_eq!(SyntheticParams::from_toml_str(&text).unwrap(), p);
        assert!(p.with_overrides(&["nosuch=1"]).is_err());
    }

    #[test]
    fn single_node() {
        let p = SyntheticParams {
            nodes: 1,
            ..Default::default()
        };
        let s = generate_synthetic(&p, 1).unwrap();
        assert_eq!(s.graph.len(), 1);
        assert_eq!(s.graph.edge_count(), 0);
    }

    #[test]
    fn too_dense_is_rejected() {
        let p = SyntheticParams {
            nodes: 5,
            mean_total_degree: 8.0,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic(&p, 1), Err(Error::Generation(_))));
    }

    #[test]
    fn same_seed_same_graph() {
        let p = SyntheticParams {
            nodes: 500,
            ..Default::default()
        };
        let a = generate_synthetic(&p, 7).unwrap();
        let b = generate_synthetic(&p, 7).unwrap();
        assert_eq!(a.graph, b.graph);
    }
}
