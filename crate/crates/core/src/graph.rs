//! Undirected simple graphs and the network families used to build datasets.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng64;

/// Undirected simple graph on nodes `0..n`.
///
/// Edges are stored once as `(i, j)` with `i < j`, sorted; adjacency lists
/// are sorted as well. Values are immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Build a graph, rejecting self-loops, duplicates and out-of-range
    /// endpoints. Pairs may be given in either orientation.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("graph needs at least one node".into()));
        }
        let mut list: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) has an endpoint outside [0, {n})"
                )));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop at node {a}")));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in &list {
            adj[i].push(j);
            adj[j].push(i);
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        Ok(Self {
            n,
            edges: list,
            adj,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(i, j)` with `i < j`, lexicographically sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n && self.adj[a].binary_search(&b).is_ok()
    }

    /// `y = A x` for the adjacency matrix `A`.
    pub fn adjacency_matvec(&self, x: &[f64], y: &mut [f64]) {
        for (v, out) in y.iter_mut().enumerate() {
            *out = self.adj[v].iter().map(|&u| x[u]).sum();
        }
    }

    /// Graph with node `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for a graph on {} nodes",
                perm.len(),
                self.n
            )));
        }
        Graph::new(self.n, self.edges.iter().map(|&(a, b)| (perm[a], perm[b])))
    }

    /// Serialize in the edge-list text format: `n m` header, then one
    /// `i j` line per edge (0-indexed, `i < j`), LF line endings.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(16 + 12 * self.edges.len());
        let _ = writeln!(out, "{} {}", self.n, self.edges.len());
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    /// Parse the edge-list text format. `origin` only labels error messages.
    pub fn parse_edge_list(text: &str, origin: &Path) -> Result<Graph> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing `n m` header".into()))?;
        let (n, m) = parse_pair(header).map_err(|msg| parse_err(hline, msg))?;
        let mut edges = Vec::with_capacity(m);
        for (lineno, line) in lines {
            let pair = parse_pair(line).map_err(|msg| parse_err(lineno, msg))?;
            edges.push(pair);
        }
        if edges.len() != m {
            return Err(parse_err(
                hline,
                format!("header announces {m} edges, found {}", edges.len()),
            ));
        }
        Graph::new(n, edges).map_err(|e| parse_err(hline, e.to_string()))
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Graph::parse_edge_list(&text, path)
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }
}

fn parse_pair(line: &str) -> std::result::Result<(usize, usize), String> {
    let mut it = line.split_whitespace();
    let mut next = || -> std::result::Result<usize, String> {
        it.next()
            .ok_or_else(|| format!("expected two integers, got `{line}`"))?
            .parse::<usize>()
            .map_err(|e| format!("`{line}`: {e}"))
    };
    let a = next()?;
    let b = next()?;
    if it.next().is_some() {
        return Err(format!("trailing tokens in `{line}`"));
    }
    Ok((a, b))
}

/// True iff a BFS from node 0 reaches every node.
pub fn is_connected(g: &Graph) -> bool {
    let mut seen = vec![false; g.n()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(v) = queue.pop_front() {
        for &u in g.neighbors(v) {
            if !seen[u] {
                seen[u] = true;
                reached += 1;
                queue.push_back(u);
            }
        }
    }
    reached == g.n()
}

pub fn make_cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidSize(format!("cycle needs n >= 3, got {n}")));
    }
    Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
}

pub fn make_path(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("path needs n >= 2, got {n}")));
    }
    Graph::new(n, (0..n - 1).map(|i| (i, i + 1)))
}

/// Star with hub 0.
pub fn make_star(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("star needs n >= 2, got {n}")));
    }
    Graph::new(n, (1..n).map(|i| (0, i)))
}

/// Hub 0 joined to every node of the rim cycle `1..n`.
pub fn make_wheel(n: usize) -> Result<Graph> {
    if n < 4 {
        return Err(Error::InvalidSize(format!("wheel needs n >= 4, got {n}")));
    }
    let rim = n - 1;
    let spokes = (1..n).map(|i| (0, i));
    let ring = (0..rim).map(|k| (1 + k, 1 + (k + 1) % rim));
    Graph::new(n, spokes.chain(ring))
}

pub fn make_complete(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidSize("complete graph needs n >= 1".into()));
    }
    Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
}

/// Erdős–Rényi G(n, p): each of the C(n, 2) pairs, visited in
/// lexicographic order, is kept iff `uniform() < p`. The result may be
/// disconnected.
pub fn make_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("ER graph needs n >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    let mut rng = Rng64::new(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.uniform() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges)
}

/// Barabási–Albert growth from a star on `m + 1` nodes (hub 0). Each new
/// node attaches to `m` distinct existing nodes drawn with probability
/// proportional to their current degree; duplicate draws are rejected.
pub fn make_scale_free(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m == 0 || m >= n {
        return Err(Error::InvalidParams(format!(
            "scale-free graph needs 1 <= m < n, got m = {m}, n = {n}"
        )));
    }
    let mut rng = Rng64::new(seed);
    let mut edges: Vec<(usize, usize)> = (1..=m).map(|i| (0, i)).collect();
    // One entry per edge endpoint: a uniform pick is a degree-weighted pick.
    let mut endpoints: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    let mut targets = Vec::with_capacity(m);
    for v in m + 1..n {
        targets.clear();
        while targets.len() < m {
            let t = endpoints[rng.below(endpoints.len() as u64) as usize];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, v));
            endpoints.push(t);
            endpoints.push(v);
        }
    }
    Graph::new(n, edges)
}

/// Way of setting the ER edge probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErDensity {
    Probability(f64),
    /// `p = <k> / n`.
    MeanDegree(f64),
}

/// Network family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    Cycle,
    Path,
    Star,
    Wheel,
    Er { density: ErDensity },
    ScaleFree { m: usize },
}

impl GraphFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            GraphFamily::Cycle => "cycle",
            GraphFamily::Path => "path",
            GraphFamily::Star => "star",
            GraphFamily::Wheel => "wheel",
            GraphFamily::Er { .. } => "er",
            GraphFamily::ScaleFree { .. } => "scale_free",
        }
    }

    pub fn min_size(&self) -> usize {
        match self {
            GraphFamily::Cycle => 3,
            GraphFamily::Path | GraphFamily::Star | GraphFamily::Er { .. } => 2,
            GraphFamily::Wheel => 4,
            GraphFamily::ScaleFree { m } => m + 1,
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, GraphFamily::Er { .. } | GraphFamily::ScaleFree { .. })
    }

    /// Check family parameters that do not depend on `n`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            GraphFamily::Er {
                density: ErDensity::Probability(p),
            } if !(p > 0.0 && p <= 1.0) => Err(Error::InvalidProbability(p)),
            GraphFamily::Er {
                density: ErDensity::MeanDegree(k),
            } if !(k > 0.0 && k.is_finite()) => Err(Error::InvalidParams(format!(
                "ER mean degree must be positive, got {k}"
            ))),
            GraphFamily::ScaleFree { m: 0 } => {
                Err(Error::InvalidParams("scale-free m must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Edge probability used for an ER instance on `n` nodes.
    pub fn er_probability(density: ErDensity, n: usize) -> f64 {
        match density {
            ErDensity::Probability(p) => p,
            ErDensity::MeanDegree(k) => (k / n as f64).min(1.0),
        }
    }

    /// One instance on `n` nodes. The seed is ignored by deterministic
    /// families.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Graph> {
        match *self {
            GraphFamily::Cycle => make_cycle(n),
            GraphFamily::Path => make_path(n),
            GraphFamily::Star => make_star(n),
            GraphFamily::Wheel => make_wheel(n),
            GraphFamily::Er { density } => make_er(n, Self::er_probability(density, n), seed),
            GraphFamily::ScaleFree { m } => make_scale_free(n, m, seed),
        }
    }
}
