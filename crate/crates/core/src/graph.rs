//! Attributed graphs with typed directed edges, in-neighbor indexing and
//! virtual-node augmentation.

use std::borrow::Cow;
use std::collections::HashMap;

use crate::error::{Error, Result};

/// A directed edge `src -> dst` carrying an edge-type id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: usize,
}

impl Edge {
    pub fn new(src: usize, dst: usize, kind: usize) -> Self {
        Edge { src, dst, kind }
    }

    pub fn reversed(self) -> Self {
        Edge {
            src: self.dst,
            dst: self.src,
            kind: self.kind,
        }
    }
}

/// An attributed graph. Validated on construction and immutable afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n_edge_types: usize,
    nodes: Vec<Vec<f64>>,
    edges: Vec<Edge>,
    graph_attrs: Option<Vec<f64>>,
    label: Option<bool>,
}

impl Graph {
    pub fn new(
        n_edge_types: usize,
        nodes: Vec<Vec<f64>>,
        edges: Vec<Edge>,
        graph_attrs: Option<Vec<f64>>,
        label: Option<bool>,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        let d_x = nodes[0].len();
        for (i, x) in nodes.iter().enumerate() {
            if x.len() != d_x {
                return Err(Error::InvalidGraph(format!(
                    "node {i} has {} attributes, expected {d_x}",
                    x.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "node {i} has a non-finite attribute"
                )));
            }
        }
        let n = nodes.len();
        for e in &edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {}->{} references a node outside 0..{n}",
                    e.src, e.dst
                )));
            }
            if e.kind >= n_edge_types {
                return Err(Error::InvalidGraph(format!(
                    "edge {}->{} has type {} but only {n_edge_types} edge types are declared",
                    e.src, e.dst, e.kind
                )));
            }
        }
        if let Some(g) = &graph_attrs {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGraph(
                    "graph attributes contain a non-finite value".into(),
                ));
            }
        }
        Ok(Graph {
            n_edge_types,
            nodes,
            edges,
            graph_attrs,
            label,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edge_types(&self) -> usize {
        self.n_edge_types
    }

    /// Attribute dimension shared by every node.
    pub fn attr_dim(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn graph_attrs(&self) -> Option<&[f64]> {
        self.graph_attrs.as_deref()
    }

    pub fn label(&self) -> Option<bool> {
        self.label
    }

    pub fn with_label(mut self, label: Option<bool>) -> Self {
        self.label = label;
        self
    }

    /// Copy of this graph with node `i` carrying attributes `x`.
    pub fn with_node_attrs(&self, i: usize, x: Vec<f64>) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        nodes[i] = x;
        Graph::new(
            self.n_edge_types,
            nodes,
            self.edges.clone(),
            self.graph_attrs.clone(),
            self.label,
        )
    }

    /// Copy of this graph with the given edge list.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self> {
        Graph::new(
            self.n_edge_types,
            self.nodes.clone(),
            edges,
            self.graph_attrs.clone(),
            self.label,
        )
    }

    /// Relabels nodes so that old node `i` becomes node `perm[i]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n {
            return Err(Error::InvalidGraph(format!(
                "permutation has length {}, graph has {n} nodes",
                perm.len()
            )));
        }
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidGraph("not a permutation".into()));
            }
            seen[p] = true;
        }
        let mut nodes = vec![Vec::new(); n];
        for (old, x) in self.nodes.iter().enumerate() {
            nodes[perm[old]] = x.clone();
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(perm[e.src], perm[e.dst], e.kind))
            .collect();
        Graph::new(
            self.n_edge_types,
            nodes,
            edges,
            self.graph_attrs.clone(),
            self.label,
        )
    }
}

/// In-neighbor lists per `(node, edge type)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborIndex {
    n_edge_types: usize,
    // flattened [node * n_edge_types + kind]
    lists: Vec<Vec<usize>>,
}

impl NeighborIndex {
    pub fn neighbors(&self, node: usize, kind: usize) -> &[usize] {
        &self.lists[node * self.n_edge_types + kind]
    }

    pub fn n_nodes(&self) -> usize {
        self.lists.len().checked_div(self.n_edge_types).unwrap_or(0)
    }

    pub fn n_edge_types(&self) -> usize {
        self.n_edge_types
    }
}

/// Builds `N_p(i) = { j : j -> i has type p }`. Duplicate edges appear
/// once per occurrence; self-neighbors only come from explicit self-loops.
pub fn build_neighbor_index(g: &Graph) -> NeighborIndex {
    let p = g.n_edge_types();
    let mut lists = vec![Vec::new(); g.n_nodes() * p];
    for e in g.edges() {
        lists[e.dst * p + e.kind].push(e.src);
    }
    NeighborIndex {
        n_edge_types: p,
        lists,
    }
}

/// A graph plus one implicit virtual node linked both ways to every real node.
///
/// The virtual links are not materialized as edges: the model handles them
/// with dedicated parameters, so the base edge list is untouched.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedGraph<'a> {
    base: &'a Graph,
    virtual_input: Cow<'a, [f64]>,
}

impl<'a> AugmentedGraph<'a> {
    pub fn base(&self) -> &'a Graph {
        self.base
    }

    /// Input of the virtual column: the graph descriptor, or zeros when absent.
    pub fn virtual_input(&self) -> &[f64] {
        &self.virtual_input
    }

    /// Real nodes linked to the virtual node (all of them).
    pub fn virtual_neighbors(&self) -> std::ops::Range<usize> {
        0..self.base.n_nodes()
    }

    pub fn n_columns(&self) -> usize {
        self.base.n_nodes() + 1
    }
}

/// Attaches the virtual node. `d_g` is the dataset-wide descriptor width; a
/// graph without descriptors gets a zero vector of that width.
pub fn augment(g: &Graph, d_g: usize) -> Result<AugmentedGraph<'_>> {
    let virtual_input = match g.graph_attrs() {
        Some(a) if a.len() == d_g => Cow::Borrowed(a),
        Some(a) => {
            return Err(Error::InvalidGraph(format!(
                "graph attributes have length {}, expected {d_g}",
                a.len()
            )))
        }
        None => Cow::Owned(vec![0.0; d_g]),
    };
    Ok(AugmentedGraph {
        base: g,
        virtual_input,
    })
}

/// Adds the reverse of every edge so each `(i->j, p)` is matched by
/// `(j->i, p)` with equal multiplicity. Existing edges keep their order;
/// missing reverses are appended. Idempotent.
pub fn undirected_expand(g: &Graph) -> Graph {
    let mut counts: HashMap<Edge, usize> = HashMap::new();
    for e in g.edges() {
        *counts.entry(*e).or_default() += 1;
    }
    let mut edges = g.edges().to_vec();
    let mut added: HashMap<Edge, usize> = HashMap::new();
    for e in g.edges() {
        let r = e.reversed();
        let have = counts.get(&r).copied().unwrap_or(0) + added.get(&r).copied().unwrap_or(0);
        let need = counts[e];
        if have < need {
            edges.push(r);
            *added.entry(r).or_default() += 1;
        }
    }
    // validated already; only the edge list changed and it reuses valid endpoints
    g.with_edges(edges)
        .expect("reversed edges of a valid graph are valid")
}
