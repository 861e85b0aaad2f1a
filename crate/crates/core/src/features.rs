//! Structural node features forming the GCN/GAT input matrix `H(0)`.
//!
//! Column order of [`build_feature_matrix`]:
//!
//! | # | column                    |
//! |---|---------------------------|
//! | 0 | clustering coefficient    |
//! | 1 | PageRank (damping 0.85)   |
//! | 2 | degree centrality         |
//! | 3 | betweenness centrality    |
//! | 4 | closeness centrality      |
//! | 5 | degree / n                |
//! | 6 | mean neighbor degree / n  |
//!
//! Each column is min-max scaled to `[0, 1]` per graph; constant columns
//! become zero.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::DenseMatrix;

/// Node-feature matrix, one row per node.
pub type FeatureMatrix = DenseMatrix;

pub const FEATURE_DIM: usize = 7;

pub const COLUMN_NAMES: [&str; FEATURE_DIM] = [
    "clustering",
    "pagerank",
    "degree_centrality",
    "betweenness",
    "closeness",
    "degree_over_n",
    "avg_neighbor_degree_over_n",
];

pub const PAGERANK_DAMPING: f64 = 0.85;
pub const PAGERANK_TOL: f64 = 1e-10;
pub const PAGERANK_MAX_ITER: usize = 10_000;

/// Local clustering `2 T(v) / (d (d - 1))`, zero when `d < 2`.
pub fn clustering_coefficient(g: &Graph) -> Vec<f64> {
    (0..g.n())
        .map(|v| {
            let nb = g.neighbors(v);
            let d = nb.len();
            if d < 2 {
                return 0.0;
            }
            let mut triangles = 0usize;
            for (k, &a) in nb.iter().enumerate() {
                for &b in &nb[k + 1..] {
                    if g.has_edge(a, b) {
                        triangles += 1;
                    }
                }
            }
            2.0 * triangles as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

/// PageRank by power iteration; stops when the L1 change is below `tol`.
/// Mass on isolated nodes is spread uniformly.
pub fn pagerank(g: &Graph, damping: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::InvalidParams(format!(
            "damping must lie in (0, 1), got {damping}"
        )));
    }
    let n = g.n();
    let inv_n = 1.0 / n as f64;
    let mut x = vec![inv_n; n];
    let mut next = vec![0.0; n];
    let mut delta = f64::INFINITY;
    for _ in 0..max_iter {
        let dangling: f64 = (0..n).filter(|&v| g.degree(v) == 0).map(|v| x[v]).sum();
        let base = (1.0 - damping) * inv_n + damping * dangling * inv_n;
        for v in 0..n {
            let inflow: f64 = g
                .neighbors(v)
                .iter()
                .map(|&u| x[u] / g.degree(u) as f64)
                .sum();
            next[v] = base + damping * inflow;
        }
        delta = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if delta < tol {
            return Ok(x);
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iter,
        residual: delta,
    })
}

/// `deg(v) / (n - 1)`; a lone node gets 1.
pub fn degree_centrality(g: &Graph) -> Vec<f64> {
    let n = g.n();
    if n == 1 {
        return vec![1.0];
    }
    let scale = 1.0 / (n - 1) as f64;
    (0..n).map(|v| g.degree(v) as f64 * scale).collect()
}

/// Brandes betweenness for undirected graphs, normalized by the number of
/// node pairs excluding the node itself, `(n-1)(n-2)/2`.
pub fn betweenness_centrality(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let mut cb = vec![0.0; n];
    if n <= 2 {
        return cb;
    }
    let mut stack = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        stack.clear();
        for v in 0..n {
            preds[v].clear();
            sigma[v] = 0.0;
            dist[v] = usize::MAX;
            delta[v] = 0.0;
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    // each unordered pair was counted from both endpoints
    let norm = 2.0 / ((n - 1) * (n - 2)) as f64;
    cb.iter_mut().for_each(|c| *c *= 0.5 * norm);
    cb
}

/// Hop distances from `s`; unreachable nodes get `usize::MAX`.
pub fn bfs_distances(g: &Graph, s: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.n()];
    let mut queue = VecDeque::from([s]);
    dist[s] = 0;
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// `(n - 1) / Σ_u dist(v, u)`; zero for a lone node.
pub fn closeness_centrality(g: &Graph) -> Result<Vec<f64>> {
    let n = g.n();
    (0..n)
        .map(|v| {
            let dist = bfs_distances(g, v);
            if dist.contains(&usize::MAX) {
                return Err(Error::PreconditionViolation(
                    "closeness needs a connected graph".into(),
                ));
            }
            let total: usize = dist.iter().sum();
            Ok(if total == 0 {
                0.0
            } else {
                (n - 1) as f64 / total as f64
            })
        })
        .collect()
}

/// Mean degree of each node's neighbors; zero for isolated nodes.
pub fn average_neighbor_degree(g: &Graph) -> Vec<f64> {
    (0..g.n())
        .map(|v| {
            let nb = g.neighbors(v);
            if nb.is_empty() {
                0.0
            } else {
                nb.iter().map(|&u| g.degree(u) as f64).sum::<f64>() / nb.len() as f64
            }
        })
        .collect()
}

/// The seven feature columns before scaling.
pub fn raw_feature_columns(g: &Graph) -> Result<[Vec<f64>; FEATURE_DIM]> {
    let n = g.n() as f64;
    let pr = pagerank(g, PAGERANK_DAMPING, PAGERANK_TOL, PAGERANK_MAX_ITER)?;
    let closeness = closeness_centrality(g)?;
    Ok([
        clustering_coefficient(g),
        pr,
        degree_centrality(g),
        betweenness_centrality(g),
        closeness,
        (0..g.n()).map(|v| g.degree(v) as f64 / n).collect(),
        average_neighbor_degree(g).into_iter().map(|d| d / n).collect(),
    ])
}

/// Min-max scale `col` in place. Columns whose spread is below a
/// relative `1e-10` of their magnitude count as constant and become zero.
pub fn min_max_scale(col: &mut [f64]) {
    let (lo, hi) = col
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let spread = hi - lo;
    let magnitude = lo.abs().max(hi.abs());
    if !(spread > 1e-10 * magnitude) || spread == 0.0 {
        col.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    for x in col.iter_mut() {
        *x = ((*x - lo) / spread).clamp(0.0, 1.0);
    }
}

/// The `n × 7` scaled input matrix.
pub fn build_feature_matrix(g: &Graph) -> Result<FeatureMatrix> {
    let mut cols = raw_feature_columns(g)?;
    for col in cols.iter_mut() {
        min_max_scale(col);
    }
    let m = DenseMatrix::from_fn(g.n(), FEATURE_DIM, |i, j| cols[j][i]);
    if !m.is_finite() {
        return Err(Error::NumericFailure("non-finite node feature".into()));
    }
    Ok(m)
}

/// CSV with a header row of column names.
pub fn features_to_csv(m: &FeatureMatrix) -> String {
    let mut out = COLUMN_NAMES.join(",");
    out.push('\n');
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
