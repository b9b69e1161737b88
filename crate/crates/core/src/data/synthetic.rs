//! Synthetic graph-classification tasks whose labels follow exactly from the
//! generated graph.
//!
//! * `triangle`: undirected random graphs, positive iff a triangle exists.
//! * `long-range-parity`: paths whose two end nodes carry a `±1` mark;
//!   positive iff exactly one mark is negative. The ends are at least
//!   `min_nodes - 1` hops apart, so local pooling cannot combine them.
//! * `attr-majority`: random graphs with a `±1` attribute per node; positive
//!   iff strictly more nodes are `+1`. Mean pooling solves it.
//!
//! Every node carries two attributes.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Triangle,
    LongRangeParity,
    AttrMajority,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Triangle, Task::LongRangeParity, Task::AttrMajority];

    pub fn name(self) -> &'static str {
        match self {
            Task::Triangle => "triangle",
            Task::LongRangeParity => "long-range-parity",
            Task::AttrMajority => "attr-majority",
        }
    }

    /// Node-count range used when none is given.
    pub fn default_nodes(self) -> (usize, usize) {
        match self {
            Task::Triangle => (6, 12),
            Task::LongRangeParity => (8, 12),
            Task::AttrMajority => (5, 15),
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangle" | "triangle-presence" => Ok(Task::Triangle),
            "long-range-parity" | "parity" => Ok(Task::LongRangeParity),
            "attr-majority" | "majority" => Ok(Task::AttrMajority),
            other => Err(Error::Unknown {
                kind: "task",
                name: other.into(),
            }),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub task: Task,
    pub n_graphs: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(task: Task, n_graphs: usize, seed: u64) -> Self {
        let (min_nodes, max_nodes) = task.default_nodes();
        SyntheticSpec {
            task,
            n_graphs,
            min_nodes,
            max_nodes,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_nodes == 0 || self.min_nodes > self.max_nodes {
            return Err(Error::Config(format!(
                "invalid node range {}..={}",
                self.min_nodes, self.max_nodes
            )));
        }
        if self.task == Task::LongRangeParity && self.min_nodes < 2 {
            return Err(Error::Config("parity paths need at least 2 nodes".into()));
        }
        Ok(())
    }
}

fn undirected(pairs: &[(usize, usize)]) -> Vec<Edge> {
    pairs
        .iter()
        .flat_map(|&(a, b)| [Edge::new(a, b, 0), Edge::new(b, a, 0)])
        .collect()
}

/// Edge probability giving roughly even odds of containing a triangle.
fn triangle_edge_prob(n: usize) -> f64 {
    let triples = (n * (n - 1) * (n - 2)) as f64 / 6.0;
    if triples == 0.0 {
        return 0.5;
    }
    (std::f64::consts::LN_2 / triples).cbrt().min(1.0)
}

#[allow(clippy::needless_range_loop)]
fn gen_triangle<R: Rng>(n: usize, rng: &mut R) -> Result<Graph> {
    let p = triangle_edge_prob(n);
    let mut adj = vec![vec![false; n]; n];
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen::<f64>() < p {
                adj[a][b] = true;
                adj[b][a] = true;
                pairs.push((a, b));
            }
        }
    }
    // an edge closes a triangle iff its endpoints share a neighbor
    let label = pairs
        .iter()
        .any(|&(a, b)| (0..n).any(|c| adj[a][c] && adj[b][c]));
    let nodes = (0..n)
        .map(|i| vec![1.0, adj[i].iter().filter(|&&x| x).count() as f64])
        .collect();
    Graph::new(1, nodes, undirected(&pairs), None, Some(label))
}

fn sign<R: Rng>(rng: &mut R) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn gen_parity<R: Rng>(n: usize, rng: &mut R) -> Result<Graph> {
    let (a, b) = (sign(rng), sign(rng));
    let pairs: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    let nodes = (0..n)
        .map(|i| match i {
            0 => vec![1.0, a],
            i if i == n - 1 => vec![1.0, b],
            _ => vec![0.0, 0.0],
        })
        .collect();
    Graph::new(1, nodes, undirected(&pairs), None, Some(a != b))
}

fn gen_majority<R: Rng>(n: usize, rng: &mut R) -> Result<Graph> {
    let signs: Vec<f64> = (0..n).map(|_| sign(rng)).collect();
    let mut pairs = Vec::new();
    // random spanning tree keeps every graph connected, plus a few chords
    for i in 1..n {
        pairs.push((rng.gen_range(0..i), i));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen::<f64>() < 0.1 && !pairs.contains(&(a, b)) {
                pairs.push((a, b));
            }
        }
    }
    let label = signs.iter().sum::<f64>() > 0.0;
    let nodes = signs
        .iter()
        .map(|&s| vec![s, rng.gen_range(-1.0..1.0)])
        .collect();
    Graph::new(1, nodes, undirected(&pairs), None, Some(label))
}

/// Recomputes a synthetic label from the graph alone, by a different route
/// than the generator.
pub fn check_label(task: Task, g: &Graph) -> bool {
    match task {
        Task::Triangle => {
            let n = g.n_nodes();
            let has = |a: usize, b: usize| g.edges().iter().any(|e| e.src == a && e.dst == b);
            (0..n).any(|i| {
                (i + 1..n).any(|j| has(i, j) && (j + 1..n).any(|k| has(j, k) && has(i, k)))
            })
        }
        Task::LongRangeParity => {
            let mut degree = vec![0usize; g.n_nodes()];
            for e in g.edges() {
                degree[e.src] += 1;
            }
            let negatives = (0..g.n_nodes())
                .filter(|&i| degree[i] <= 1 && g.node(i)[1] < 0.0)
                .count();
            negatives % 2 == 1
        }
        Task::AttrMajority => {
            let pos = g.nodes().iter().filter(|x| x[0] > 0.0).count();
            2 * pos > g.n_nodes()
        }
    }
}

/// Generates `spec.n_graphs` graphs, deterministic in `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(spec.n_graphs);
    for k in 0..spec.n_graphs {
        let n = rng.gen_range(spec.min_nodes..=spec.max_nodes);
        let graph = match spec.task {
            Task::Triangle => gen_triangle(n, &mut rng)?,
            Task::LongRangeParity => gen_parity(n, &mut rng)?,
            Task::AttrMajority => gen_majority(n, &mut rng)?,
        };
        if graph.label() != Some(check_label(spec.task, &graph)) {
            return Err(Error::Dataset(format!(
                "generated {} graph {k} failed the label check",
                spec.task
            )));
        }
        samples.push(Sample {
            id: format!("{}-{k}", spec.task),
            graph,
        });
    }
    Dataset::new(samples)
}

/// Random attributed graph for tests and gradient checks: attributes in
/// `[-1, 1)`, each ordered pair linked with probability `edge_prob` under a
/// random edge type, random label.
pub fn random_graph<R: Rng + ?Sized>(
    rng: &mut R,
    n_nodes: usize,
    n_edge_types: usize,
    d_x: usize,
    d_g: Option<usize>,
    edge_prob: f64,
) -> Result<Graph> {
    let nodes = (0..n_nodes)
        .map(|_| (0..d_x).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut edges = Vec::new();
    for a in 0..n_nodes {
        for b in 0..n_nodes {
            if a != b && rng.gen::<f64>() < edge_prob {
                edges.push(Edge::new(a, b, rng.gen_range(0..n_edge_types)));
            }
        }
    }
    edges.shuffle(rng);
    let graph_attrs = d_g.map(|d| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect());
    Graph::new(n_edge_types, nodes, edges, graph_attrs, Some(rng.gen()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::write_jsonl;

    #[test]
    fn triangle_k3() {
        let g = Graph::new(
            1,
            vec![vec![1.0, 2.0]; 3],
            undirected(&[(0, 1), (1, 2), (0, 2)]),
            None,
            None,
        )
        .unwrap();
        assert!(check_label(Task::Triangle, &g));
        let path = g.with_edges(undirected(&[(0, 1), (1, 2)])).unwrap();
        assert!(!check_label(Task::Triangle, &path));
    }

    #[test]
    fn parity_marks() {
        let mk = |a: f64, b: f64| {
            Graph::new(
                1,
                vec![vec![1.0, a], vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, b]],
                undirected(&[(0, 1), (1, 2), (2, 3)]),
                None,
                None,
            )
            .unwrap()
        };
        assert!(!check_label(Task::LongRangeParity, &mk(1.0, 1.0)));
        assert!(!check_label(Task::LongRangeParity, &mk(-1.0, -1.0)));
        assert!(check_label(Task::LongRangeParity, &mk(1.0, -1.0)));
    }

    #[test]
    fn labels_match_checker_and_are_mixed() {
        for task in Task::ALL {
            let d = generate(&SyntheticSpec::new(task, 300, 11)).unwrap();
            let labels = d.labels().unwrap();
            for s in d.samples() {
                assert_eq!(s.graph.label(), Some(check_label(task, &s.graph)));
                let (lo, hi) = task.default_nodes();
                assert!((lo..=hi).contains(&s.graph.n_nodes()));
            }
            let pos = labels.iter().filter(|&&l| l).count();
            assert!((60..=240).contains(&pos), "{task}: {pos} positives of 300");
        }
    }

    #[test]
    fn generation_is_byte_deterministic() {
        let bytes = |seed| {
            let d = generate(&SyntheticSpec::new(Task::Triangle, 1000, seed)).unwrap();
            let mut out = Vec::new();
            write_jsonl(&d, &mut out).unwrap();
            out
        };
        assert_eq!(bytes(4), bytes(4));
        assert_ne!(bytes(4), bytes(5));
    }

    #[test]
    fn task_names() {
        for t in Task::ALL {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
        }
        assert!("cycles".parse::<Task>().is_err());
    }
}
