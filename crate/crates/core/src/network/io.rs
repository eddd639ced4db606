//! CSV input and output for firm graphs and sweeps.
//!
//! Nodes: `id,sales,sector,region`. Edges: `src,dst`, direction = money flow.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::graph::{Firm, FirmGraph, Sector};
use super::sweep::RemovalSweep;
use crate::error::{Error, Result};

#[derive(Debug, Deserialize, Serialize)]
struct NodeRow {
    id: u64,
    sales: f64,
    sector: String,
    region: String,
}

#[derive(Debug, Deserialize, Serialize)]
struct EdgeRow {
    src: u64,
    dst: u64,
}

fn line_of(pos: Option<&csv::Position>) -> u64 {
    pos.map(|p| p.line()).unwrap_or(0)
}

pub fn read_firms<R: Read>(reader: R) -> Result<Vec<Firm>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for want in ["id", "sales", "sector", "region"] {
        if !headers.iter().any(|h| h == want) {
            return Err(Error::Data(format!("node CSV lacks a `{want}` column")));
        }
    }
    let mut firms = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = line_of(record.position());
        let row: NodeRow = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::Data(format!("node CSV line {line}: {e}")))?;
        if !row.sales.is_finite() {
            return Err(Error::Data(format!("node CSV line {line}: sales is not finite")));
        }
        let sector = row
            .sector
            .parse::<Sector>()
            .map_err(|e| Error::Data(format!("node CSV line {line}: {e}")))?;
        firms.push(Firm {
            id: row.id,
            sales: row.sales,
            sector,
            region: row.region,
        });
    }
    Ok(firms)
}

/// Reads edges and resolves their endpoints against `firms`. A dangling
/// endpoint, self-loop or repeated edge is a graph-integrity error naming the
/// CSV line.
pub fn read_edges<R: Read>(reader: R, firms: &[Firm]) -> Result<Vec<(usize, usize)>> {
    let index: HashMap<u64, usize> = firms.iter().enumerate().map(|(i, f)| (f.id, i)).collect();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for want in ["src", "dst"] {
        if !headers.iter().any(|h| h == want) {
            return Err(Error::Data(format!("edge CSV lacks a `{want}` column")));
        }
    }
    let mut edges = Vec::new();
    let mut seen: HashMap<(usize, usize), u64> = HashMap::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = line_of(record.position());
        let row: EdgeRow = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::Data(format!("edge CSV line {line}: {e}")))?;
        let resolve = |id: u64, end: &str| {
            index.get(&id).copied().ok_or_else(|| {
                Error::Graph(format!("edge CSV line {line}: {end} {id} is not a known node"))
            })
        };
        let a = resolve(row.src, "src")?;
        let b = resolve(row.dst, "dst")?;
        if a == b {
            return Err(Error::Graph(format!(
                "edge CSV line {line}: self-loop on node {}",
                row.src
            )));
        }
        if let Some(first) = seen.insert((a, b), line) {
            return Err(Error::Graph(format!(
                "edge CSV line {line}: repeats the edge {} -> {} from line {first}",
                row.src, row.dst
            )));
        }
        edges.push((a, b));
    }
    Ok(edges)
}

pub fn load_graph(nodes: &Path, edges: &Path) -> Result<FirmGraph> {
    let nf = std::fs::File::open(nodes).map_err(|e| Error::io(nodes, e))?;
    let firms = read_firms(std::io::BufReader::new(nf))?;
    let ef = std::fs::File::open(edges).map_err(|e| Error::io(edges, e))?;
    let pairs = read_edges(std::io::BufReader::new(ef), &firms)?;
    FirmGraph::new(firms, pairs)
}

pub fn write_firms<W: Write>(graph: &FirmGraph, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["id", "sales", "sector", "region"])?;
    for f in graph.firms() {
        w.serialize(NodeRow {
            id: f.id,
            sales: f.sales,
            sector: f.sector.as_str().to_string(),
            region: f.region.clone(),
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_edges<W: Write>(graph: &FirmGraph, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["src", "dst"])?;
    for &(a, b) in graph.edges() {
        w.serialize(EdgeRow {
            src: graph.firm(a as usize).id,
            dst: graph.firm(b as usize).id,
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_graph(graph: &FirmGraph, nodes: &Path, edges: &Path) -> Result<()> {
    let nf = std::fs::File::create(nodes).map_err(|e| Error::io(nodes, e))?;
    write_firms(graph, std::io::BufWriter::new(nf))?;
    let ef = std::fs::File::create(edges).map_err(|e| Error::io(edges, e))?;
    write_edges(graph, std::io::BufWriter::new(ef))
}

/// Sweep as a `f,Q` CSV.
pub fn write_sweep<W: Write>(sweep: &RemovalSweep, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["f", "Q"])?;
    for p in &sweep.points {
        w.write_record([p.f.to_string(), p.q.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
