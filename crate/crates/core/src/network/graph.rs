use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Construction,
    Manufacturing,
    Wholesale,
    Services,
    Other,
}

impl Sector {
    pub const ALL: [Sector; 5] = [
        Sector::Construction,
        Sector::Manufacturing,
        Sector::Wholesale,
        Sector::Services,
        Sector::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Sector::Construction => "construction",
            Sector::Manufacturing => "manufacturing",
            Sector::Wholesale => "wholesale",
            Sector::Services => "services",
            Sector::Other => "other",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Sector::ALL
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Data(format!("unknown sector `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Firm {
    pub id: u64,
    pub sales: f64,
    pub sector: Sector,
    pub region: String,
}

/// Compressed adjacency: the neighbours of `v` are `targets[start[v]..start[v + 1]]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Adjacency {
    start: Vec<u32>,
    targets: Vec<u32>,
}

impl Adjacency {
    fn build(n: usize, pairs: impl Iterator<Item = (u32, u32)> + Clone) -> Self {
        let mut start = vec![0u32; n + 1];
        for (a, _) in pairs.clone() {
            start[a as usize + 1] += 1;
        }
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut targets = vec![0u32; start[n] as usize];
        for (a, b) in pairs {
            let slot = &mut fill[a as usize];
            targets[*slot as usize] = b;
            *slot += 1;
        }
        for v in 0..n {
            targets[start[v] as usize..start[v + 1] as usize].sort_unstable();
        }
        Self { start, targets }
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.start[v] as usize..self.start[v + 1] as usize]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        (self.start[v + 1] - self.start[v]) as usize
    }
}

/// An immutable directed firm network. Edges point the way money flows.
///
/// Nodes are stored sorted by id, so index order and id order agree and every
/// "ties by id" rule reduces to comparing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmGraph {
    firms: Vec<Firm>,
    edges: Vec<(u32, u32)>,
    out: Adjacency,
    inc: Adjacency,
    undirected: Adjacency,
}

impl FirmGraph {
    /// Builds a graph from firms and `(src, dst)` pairs of node indices into
    /// `firms` as given. Rejects self-loops, duplicate edges, duplicate ids and
    /// out-of-range endpoints.
    pub fn new(firms: Vec<Firm>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = firms.len();
        if n > u32::MAX as usize {
            return Err(Error::Graph(format!("{n} nodes exceed the supported size")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| firms[i].id);
        if let Some(w) = order.windows(2).find(|w| firms[w[0]].id == firms[w[1]].id) {
            return Err(Error::Graph(format!("duplicate node id {}", firms[w[0]].id)));
        }
        let mut rank = vec![0u32; n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r as u32;
        }
        let mut mapped = Vec::with_capacity(edges.len());
        for (row, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::Graph(format!(
                    "edge {row} ({a} -> {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::Graph(format!(
                    "edge {row} is a self-loop on node {}",
                    firms[a].id
                )));
            }
            mapped.push((rank[a], rank[b]));
        }
        let mut firms_sorted: Vec<Option<Firm>> = firms.into_iter().map(Some).collect();
        let firms: Vec<Firm> = order
            .iter()
            .map(|&i| firms_sorted[i].take().expect("each firm taken once"))
            .collect();
        Self::from_sorted(firms, mapped)
    }

    /// `firms` already sorted by strictly increasing id; edges as indices.
    pub(crate) fn from_sorted(firms: Vec<Firm>, mut edges: Vec<(u32, u32)>) -> Result<Self> {
        let n = firms.len();
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Graph(format!(
                "duplicate edge {} -> {}",
                firms[w[0].0 as usize].id, firms[w[0].1 as usize].id
            )));
        }
        if let Some(&(a, _)) = edges.iter().find(|(a, b)| a == b) {
            return Err(Error::Graph(format!("self-loop on node {}", firms[a as usize].id)));
        }
        let out = Adjacency::build(n, edges.iter().copied());
        let inc = Adjacency::build(n, edges.iter().map(|&(a, b)| (b, a)));
        let mut both: Vec<(u32, u32)> = edges
            .iter()
            .flat_map(|&(a, b)| [(a, b), (b, a)])
            .collect();
        both.sort_unstable();
        both.dedup();
        let undirected = Adjacency::build(n, both.iter().copied());
        Ok(Self {
            firms,
            edges,
            out,
            inc,
            undirected,
        })
    }

    pub fn len(&self) -> usize {
        self.firms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.firms.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn firms(&self) -> &[Firm] {
        &self.firms
    }

    pub fn firm(&self, v: usize) -> &Firm {
        &self.firms[v]
    }

    /// Edges as `(src, dst)` index pairs in lexicographic order.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn successors(&self, v: usize) -> &[u32] {
        self.out.neighbors(v)
    }

    pub fn predecessors(&self, v: usize) -> &[u32] {
        self.inc.neighbors(v)
    }

    /// Union of in- and out-neighbours.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        self.undirected.neighbors(v)
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out.degree(v)
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.inc.degree(v)
    }

    /// In-degree plus out-degree.
    pub fn total_degree(&self, v: usize) -> usize {
        self.out.degree(v) + self.inc.degree(v)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.out.neighbors(a).binary_search(&(b as u32)).is_ok()
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.firms.binary_search_by_key(&id, |f| f.id).ok()
    }

    /// A graph with the same firms and a different edge set.
    pub fn with_edges(&self, edges: Vec<(u32, u32)>) -> Result<Self> {
        Self::from_sorted(self.firms.clone(), edges)
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        (0..self.len()).map(|v| self.in_degree(v)).collect()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        (0..self.len()).map(|v| self.out_degree(v)).collect()
    }
}
