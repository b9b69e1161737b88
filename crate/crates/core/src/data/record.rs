//! JSON-lines graph records, one graph per line:
//!
//! ```text
//! {"id":"g0","label":1,"n_edge_types":1,"nodes":[[1.0,0.0],[0.0,1.0]],"edges":[[0,1,0],[1,0,0]]}
//! ```
//!
//! `graph_attrs` is optional. Writing uses this field order and serde_json's
//! shortest round-trip float formatting, so `save(load(f))` reproduces a
//! canonically formatted file byte for byte.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphRecord {
    pub id: String,
    pub label: u8,
    pub n_edge_types: usize,
    pub nodes: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_attrs: Option<Vec<f64>>,
}

impl GraphRecord {
    pub fn from_sample(s: &Sample) -> Result<Self> {
        let g = &s.graph;
        let label = g
            .label()
            .ok_or_else(|| Error::Dataset(format!("graph `{}` has no label", s.id)))?;
        Ok(GraphRecord {
            id: s.id.clone(),
            label: label as u8,
            n_edge_types: g.n_edge_types(),
            nodes: g.nodes().to_vec(),
            edges: g.edges().iter().map(|e| [e.src, e.dst, e.kind]).collect(),
            graph_attrs: g.graph_attrs().map(<[f64]>::to_vec),
        })
    }

    pub fn into_sample(self) -> Result<Sample> {
        let label = match self.label {
            0 => false,
            1 => true,
            other => return Err(Error::InvalidGraph(format!("label {other} is not 0 or 1"))),
        };
        let edges = self
            .edges
            .iter()
            .map(|&[s, d, k]| Edge::new(s, d, k))
            .collect();
        let graph = Graph::new(
            self.n_edge_types,
            self.nodes,
            edges,
            self.graph_attrs,
            Some(label),
        )?;
        Ok(Sample { id: self.id, graph })
    }
}

/// Parses a JSON-lines stream. Blank lines are skipped; every error names
/// its 1-based line number.
pub fn read_jsonl<R: Read>(input: R, path: &Path) -> Result<Dataset> {
    let at = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut samples = Vec::new();
    let mut first_line_of: Vec<usize> = Vec::new();
    for (k, line) in BufReader::new(input).lines().enumerate() {
        let n = k + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GraphRecord = serde_json::from_str(&line).map_err(|e| at(n, e.to_string()))?;
        let sample = rec.into_sample().map_err(|e| at(n, e.to_string()))?;
        if let Some(prev) = samples.first() {
            let prev: &Sample = prev;
            let (g, h) = (&prev.graph, &sample.graph);
            if g.n_edge_types() != h.n_edge_types() {
                return Err(at(
                    n,
                    format!(
                        "n_edge_types {} differs from {} on line {}",
                        h.n_edge_types(),
                        g.n_edge_types(),
                        first_line_of[0]
                    ),
                ));
            }
            if g.attr_dim() != h.attr_dim() {
                return Err(at(
                    n,
                    format!(
                        "node attribute width {} differs from {} on line {}",
                        h.attr_dim(),
                        g.attr_dim(),
                        first_line_of[0]
                    ),
                ));
            }
        }
        if let Some(a) = sample.graph.graph_attrs() {
            let earlier = samples
                .iter()
                .zip(&first_line_of)
                .find_map(|(s, &l): (&Sample, _)| s.graph.graph_attrs().map(|b| (b.len(), l)));
            if let Some((w, l)) = earlier {
                if w != a.len() {
                    return Err(at(
                        n,
                        format!("graph_attrs width {} differs from {w} on line {l}", a.len()),
                    ));
                }
            }
        }
        first_line_of.push(n);
        samples.push(sample);
    }
    Dataset::new(samples)
}

pub fn load(path: &Path) -> Result<Dataset> {
    read_jsonl(fs::File::open(path)?, path)
}

pub fn write_jsonl<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    for s in data.samples() {
        let rec = GraphRecord::from_sample(s)?;
        let line = serde_json::to_string(&rec).map_err(|e| Error::Dataset(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn save(data: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_jsonl(data, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}
