//! Datasets: the JSON-lines graph format, synthetic benchmark tasks and a
//! toolkit-free molecule encoder.

mod molecule;
mod record;
mod synthetic;

pub use molecule::{encode_molecule_like, Atom, Bond, BondKind, ATOM_SYMBOLS, MOLECULE_EDGE_TYPES};
pub use record::{load, read_jsonl, save, write_jsonl, GraphRecord};
pub use synthetic::{check_label, generate, random_graph, SyntheticSpec, Task};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// A graph with its identifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub graph: Graph,
}

/// Graphs sharing one edge-type vocabulary and attribute widths.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
}

impl Dataset {
    /// Checks that all graphs agree on edge types, node width and
    /// descriptor width (when present).
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if let Some(first) = samples.first() {
            let p = first.graph.n_edge_types();
            let d_x = first.graph.attr_dim();
            let mut d_g: Option<usize> = None;
            for s in &samples {
                let g = &s.graph;
                if g.n_edge_types() != p {
                    return Err(Error::Dataset(format!(
                        "graph `{}` declares {} edge types, expected {p}",
                        s.id,
                        g.n_edge_types()
                    )));
                }
                if g.attr_dim() != d_x {
                    return Err(Error::Dataset(format!(
                        "graph `{}` has node width {}, expected {d_x}",
                        s.id,
                        g.attr_dim()
                    )));
                }
                if let Some(a) = g.graph_attrs() {
                    match d_g {
                        Some(d) if d != a.len() => {
                            return Err(Error::Dataset(format!(
                                "graph `{}` has descriptor width {}, expected {d}",
                                s.id,
                                a.len()
                            )))
                        }
                        _ => d_g = Some(a.len()),
                    }
                }
            }
        }
        Ok(Dataset { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn graphs(&self) -> impl Iterator<Item = &Graph> {
        self.samples.iter().map(|s| &s.graph)
    }

    pub fn n_edge_types(&self) -> Option<usize> {
        self.samples.first().map(|s| s.graph.n_edge_types())
    }

    pub fn attr_dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.graph.attr_dim())
    }

    /// Descriptor width; defaults to the node width when no graph has one.
    pub fn graph_attr_dim(&self) -> Option<usize> {
        self.samples
            .iter()
            .find_map(|s| s.graph.graph_attrs().map(<[f64]>::len))
            .or_else(|| self.attr_dim())
    }

    /// Labels of every graph; errors if one is missing.
    pub fn labels(&self) -> Result<Vec<bool>> {
        self.samples
            .iter()
            .map(|s| {
                s.graph
                    .label()
                    .ok_or_else(|| Error::Dataset(format!("graph `{}` has no label", s.id)))
            })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}
