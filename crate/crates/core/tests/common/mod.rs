//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use netloc::graph::Graph;
use netloc::rng::Rng64;

/// Dense 0/1 adjacency matrix, row-major.
pub fn dense_adjacency(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.n();
    let mut a = vec![vec![0.0; n]; n];
    for &(u, v) in g.edges() {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    a
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues in
/// descending order with unit eigenvectors as columns of the second value.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = (0..n)
        .map(|r| order.iter().map(|&c| v[r][c]).collect())
        .collect();
    (values, vectors)
}

/// Leading eigenpair of the adjacency matrix with a positive-sum vector.
pub fn oracle_pev(g: &Graph) -> (f64, Vec<f64>) {
    let (vals, vecs) = jacobi_eigen(dense_adjacency(g));
    let mut u: Vec<f64> = vecs.iter().map(|row| row[0]).collect();
    if u.iter().sum::<f64>() < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    (vals[0], u)
}

/// `Σ u⁴ / (Σ u²)²`.
pub fn oracle_ipr(u: &[f64]) -> f64 {
    let s2: f64 = u.iter().map(|x| x * x).sum();
    u.iter().map(|x| x.powi(4)).sum::<f64>() / (s2 * s2)
}

/// All-pairs hop distances by Floyd–Warshall (`usize::MAX` if unreachable).
pub fn floyd_warshall(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.n();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(u, v) in g.edges() {
        d[u][v] = 1;
        d[v][u] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn enumerate_paths(g: &Graph, at: usize, target: usize, left: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if at == target {
        out.push(path.clone());
        return;
    }
    if left == 0 {
        return;
    }
    for &w in g.neighbors(at) {
        if !path.contains(&w) {
            path.push(w);
            enumerate_paths(g, w, target, left - 1, path, out);
            path.pop();
        }
    }
}

/// Betweenness by explicit enumeration of every shortest path between every
/// unordered pair, scaled by `2 / ((n-1)(n-2))`.
pub fn brute_force_betweenness(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let d = floyd_warshall(g);
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in (s + 1)..n {
            if d[s][t] >= usize::MAX / 4 {
                continue;
            }
            let mut paths = Vec::new();
            enumerate_paths(g, s, t, d[s][t], &mut vec![s], &mut paths);
            let total = paths.len() as f64;
            for p in &paths {
                for &v in &p[1..p.len() - 1] {
                    bc[v] += 1.0 / total;
                }
            }
        }
    }
    if n > 2 {
        let scale = 2.0 / ((n - 1) as f64 * (n - 2) as f64);
        bc.iter_mut().for_each(|x| *x *= scale);
    }
    bc
}

/// Solve `M x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    x
}

/// PageRank as the solution of `(I - d Pᵀ) x = (1-d)/n · 1`.
pub fn pagerank_linear(g: &Graph, damping: f64) -> Vec<f64> {
    let n = g.n();
    let mut m = vec![vec![0.0; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(u, v) in g.edges() {
        m[v][u] -= damping / g.degree(u) as f64;
        m[u][v] -= damping / g.degree(v) as f64;
    }
    solve_linear(m, vec![(1.0 - damping) / n as f64; n])
}

/// Central difference of a scalar function.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Uniformly random permutation of `0..n`.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    Rng64::new(seed).shuffle(&mut p);
    p
}

/// Random connected graph: a random spanning tree plus extra edges with
/// probability `p`.
pub fn random_connected_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = Rng64::new(seed);
    let mut edges = Vec::new();
    for v in 1..n {
        let parent = rng.below(v as u64) as usize;
        edges.push((parent, v));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.uniform() < p && !edges.contains(&(u, v)) {
                edges.push((u, v));
            }
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    Graph::new(n, edges.into_iter().map(|(u, v)| (perm[u], perm[v]))).unwrap()
}
