//! DAG representation, random-graph generators for benchmarks, and
//! topological utilities.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed acyclic graph over `d` nodes; `adj[i][j]` means edge `i → j`.
///
/// Public constructors validate the absence of self-loops and cycles, so a
/// `Dag` value can be assumed acyclic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct Dag {
    d: usize,
    adj: Vec<bool>,
}

impl Dag {
    /// Graph with `d` nodes and no edges.
    pub fn empty(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("graph needs at least one node".into()));
        }
        Ok(Self {
            d,
            adj: vec![false; d * d],
        })
    }

    pub fn from_edges(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(d)?;
        for &(i, j) in edges {
            g.insert_edge(i, j)?;
        }
        topological_sort(&g)?; // rejects cycles
        Ok(g)
    }

    fn insert_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.d || j >= self.d {
            return Err(Error::InvalidConfig(format!(
                "edge ({i}, {j}) out of range for {} nodes",
                self.d
            )));
        }
        if i == j {
            return Err(Error::InvalidConfig(format!("self-loop at node {i}")));
        }
        self.adj[i * self.d + j] = true;
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.d + j]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&e| e).count()
    }

    /// Edges sorted lexicographically.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.d {
            for j in 0..self.d {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        (0..self.d).filter(|&i| self.has_edge(i, j)).collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.d).filter(|&j| self.has_edge(i, j)).collect()
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        (0..self.d).all(|j| !self.has_edge(i, j))
    }

    /// Induced subgraph over `nodes` (kept in the given order).
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Dag> {
        let mut g = Dag::empty(nodes.len())?;
        for (a, &i) in nodes.iter().enumerate() {
            for (b, &j) in nodes.iter().enumerate() {
                if self.has_edge(i, j) {
                    g.insert_edge(a, b)?;
                }
            }
        }
        Ok(g)
    }

    pub fn read_json_path<P: AsRef<Path>>(path: P) -> Result<Dag> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn write_json_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("graph serialization");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Wire format: `{"d": …, "edges": [[i, j], …]}` with edges sorted.
#[derive(Serialize, Deserialize)]
struct GraphJson {
    d: usize,
    edges: Vec<(usize, usize)>,
}

impl From<Dag> for GraphJson {
    fn from(g: Dag) -> Self {
        GraphJson {
            d: g.d,
            edges: g.edges(),
        }
    }
}

impl TryFrom<GraphJson> for Dag {
    type Error = Error;

    fn try_from(j: GraphJson) -> Result<Dag> {
        Dag::from_edges(j.d, &j.edges)
    }
}

/// Permutation of node indices, earliest (source side) first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct TopoOrder {
    pi: Vec<usize>,
}

impl TopoOrder {
    pub fn new(pi: Vec<usize>) -> Result<Self> {
        let d = pi.len();
        if d == 0 {
            return Err(Error::InvalidPermutation("empty order".into()));
        }
        let mut seen = vec![false; d];
        for &v in &pi {
            if v >= d {
                return Err(Error::InvalidPermutation(format!(
                    "index {v} out of range for {d} nodes"
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidPermutation(format!("index {v} repeated")));
            }
        }
        Ok(Self { pi })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.pi
    }

    /// `positions()[v]` is the rank of node `v` in the order.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.pi.len()];
        for (t, &v) in self.pi.iter().enumerate() {
            pos[v] = t;
        }
        pos
    }

    pub fn reversed(&self) -> TopoOrder {
        let mut pi = self.pi.clone();
        pi.reverse();
        TopoOrder { pi }
    }
}

impl From<TopoOrder> for Vec<usize> {
    fn from(o: TopoOrder) -> Self {
        o.pi
    }
}

impl TryFrom<Vec<usize>> for TopoOrder {
    type Error = Error;

    fn try_from(pi: Vec<usize>) -> Result<TopoOrder> {
        TopoOrder::new(pi)
    }
}

/// Which benchmark graph family to sample. ER uses an expected edge count of
/// `d` (ER1) or `4d` (ER4); SF attaches 1 (SF1) or 4 (SF4) edges per arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Er1,
    Er4,
    Sf1,
    Sf4,
}

impl GraphKind {
    pub fn sample(self, d: usize, seed: u64) -> Result<Dag> {
        match self {
            GraphKind::Er1 => sample_er_dag(d, d, seed),
            GraphKind::Er4 => sample_er_dag(d, 4 * d, seed),
            GraphKind::Sf1 => sample_sf_dag(d, 1, seed),
            GraphKind::Sf4 => sample_sf_dag(d, 4, seed),
        }
    }
}

impl std::str::FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "er1" => Ok(GraphKind::Er1),
            "er4" => Ok(GraphKind::Er4),
            "sf1" => Ok(GraphKind::Sf1),
            "sf4" => Ok(GraphKind::Sf4),
            other => Err(Error::InvalidConfig(format!(
                "unknown graph kind {other:?} (expected er1|er4|sf1|sf4)"
            ))),
        }
    }
}

impl std::fmt::Display for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GraphKind::Er1 => "er1",
            GraphKind::Er4 => "er4",
            GraphKind::Sf1 => "sf1",
            GraphKind::Sf4 => "sf4",
        };
        f.write_str(s)
    }
}

/// Erdős–Rényi DAG: undirected pairs are kept independently with probability
/// `expected_edges / C(d,2)` and oriented along a uniformly random
/// permutation, so the result is acyclic by construction.
pub fn sample_er_dag(d: usize, expected_edges: usize, seed: u64) -> Result<Dag> {
    let mut g = Dag::empty(d)?;
    let pairs = d * (d - 1) / 2;
    if expected_edges > pairs {
        return Err(Error::InvalidConfig(format!(
            "expected_edges {expected_edges} exceeds the {pairs} available pairs for d = {d}"
        )));
    }
    if pairs == 0 {
        return Ok(g);
    }
    let p = expected_edges as f64 / pairs as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(&mut rng);
    let mut pos = vec![0usize; d];
    for (t, &v) in perm.iter().enumerate() {
        pos[v] = t;
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if rng.gen::<f64>() < p {
                let (from, to) = if pos[i] < pos[j] { (i, j) } else { (j, i) };
                g.insert_edge(from, to)?;
            }
        }
    }
    Ok(g)
}

/// Scale-free DAG via Barabási–Albert preferential attachment over the
/// arrival order `0,…,d−1`. Arrival `j` attaches to `min(m, j)` distinct
/// earlier nodes drawn with probability ∝ degree + 1; edges point
/// earlier → later, so hubs become ancestors.
pub fn sample_sf_dag(d: usize, m: usize, seed: u64) -> Result<Dag> {
    let mut g = Dag::empty(d)?;
    if m == 0 || m >= d {
        return Err(Error::InvalidConfig(format!(
            "edges per arrival must satisfy 1 <= m < d (got m = {m}, d = {d})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; d];
    for j in 1..d {
        let mut available: Vec<usize> = (0..j).collect();
        for _ in 0..m.min(j) {
            let total: f64 = available.iter().map(|&t| (degree[t] + 1) as f64).sum();
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = available.len() - 1;
            for (idx, &t) in available.iter().enumerate() {
                r -= (degree[t] + 1) as f64;
                if r < 0.0 {
                    chosen = idx;
                    break;
                }
            }
            let target = available.swap_remove(chosen);
            g.insert_edge(target, j)?;
            degree[target] += 1;
            degree[j] += 1;
        }
    }
    Ok(g)
}

/// Kahn's algorithm with deterministic tie-breaking (smallest index first).
pub fn topological_sort(g: &Dag) -> Result<TopoOrder> {
    let d = g.d();
    let mut indegree = vec![0usize; d];
    for (_, j) in g.edges() {
        indegree[j] += 1;
    }
    let mut done = vec![false; d];
    let mut order = Vec::with_capacity(d);
    for _ in 0..d {
        let next = (0..d).find(|&v| !done[v] && indegree[v] == 0);
        let v = match next {
            Some(v) => v,
            None => return Err(Error::Cycle { node: cycle_member(g, &done) }),
        };
        done[v] = true;
        order.push(v);
        for c in g.children(v) {
            indegree[c] -= 1;
        }
    }
    TopoOrder::new(order)
}

/// Walks parent links among unfinished nodes until one repeats; that node
/// lies on a cycle.
fn cycle_member(g: &Dag, done: &[bool]) -> usize {
    let start = (0..g.d()).find(|&v| !done[v]).expect("stalled sort");
    let mut seen = vec![false; g.d()];
    let mut v = start;
    loop {
        if seen[v] {
            return v;
        }
        seen[v] = true;
        v = g
            .parents(v)
            .into_iter()
            .find(|&p| !done[p])
            .expect("unfinished node with no unfinished parent");
    }
}

/// The complete DAG consistent with `order`: `i → j` iff `i` precedes `j`.
pub fn full_dag_from_order(order: &TopoOrder) -> Dag {
    let d = order.len();
    let pos = order.positions();
    let mut g = Dag::empty(d).expect("order is non-empty");
    for i in 0..d {
        for j in 0..d {
            if i != j && pos[i] < pos[j] {
                g.adj[i * d + j] = true;
            }
        }
    }
    g
}
