//! Dense and sparse linear algebra, activations, initialization and losses
//! shared by the GCN and GAT models. All arithmetic is `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::Rng64;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix from {} values",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from nested rows; panics on ragged input (test helper).
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other, "hadamard")?;
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        self.check_same_shape(other, "add")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Mean over rows (the readout of a node-feature matrix).
    pub fn column_means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x;
            }
        }
        let inv = 1.0 / self.rows as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        out
    }

    fn check_same_shape(&self, other: &DenseMatrix, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{op}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `op(a) · op(b)` through a blocked dgemm. `ta`/`tb` select transposes.
fn gemm(a: &DenseMatrix, ta: bool, b: &DenseMatrix, tb: bool) -> Result<DenseMatrix> {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (k2, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    if k != k2 {
        return Err(Error::DimensionMismatch(format!(
            "matmul: inner dimensions {k} and {k2}"
        )));
    }
    let mut out = DenseMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return Ok(out);
    }
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    // SAFETY: strides describe the row-major buffers of `a`, `b` and `out`
    // with the logical shapes checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            0.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(out)
}

/// `a · b`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    gemm(a, false, b, false)
}

/// `aᵀ · b`.
pub fn matmul_tn(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    gemm(a, true, b, false)
}

/// `a · bᵀ`.
pub fn matmul_nt(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    gemm(a, false, b, true)
}

/// Compressed sparse row matrix, used for message passing so that one
/// propagation costs O(nnz · width) instead of O(n² · width).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Keeps every nonzero entry of `m`.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut indptr = Vec::with_capacity(m.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..m.rows {
            for (j, &x) in m.row(i).iter().enumerate() {
                if x != 0.0 {
                    indices.push(j);
                    values.push(x);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: m.rows,
            cols: m.cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzeros of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// `self · x`.
    pub fn matmul_dense(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != x.rows() {
            return Err(Error::DimensionMismatch(format!(
                "sparse matmul: {}x{} by {:?}",
                self.rows,
                self.cols,
                x.shape()
            )));
        }
        let width = x.cols();
        let mut out = DenseMatrix::zeros(self.rows, width);
        for i in 0..self.rows {
            let span = self.indptr[i]..self.indptr[i + 1];
            let out_row = &mut out.data[i * width..(i + 1) * width];
            for (&j, &a) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                for (o, &v) in out_row.iter_mut().zip(x.row(j)) {
                    *o += a * v;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · x`.
    pub fn transpose_matmul_dense(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != x.rows() {
            return Err(Error::DimensionMismatch(format!(
                "sparse transpose matmul: {}x{} by {:?}",
                self.rows,
                self.cols,
                x.shape()
            )));
        }
        let width = x.cols();
        let mut out = DenseMatrix::zeros(self.cols, width);
        for i in 0..self.rows {
            let span = self.indptr[i]..self.indptr[i + 1];
            let x_row = x.row(i);
            for (&j, &a) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                let out_row = &mut out.data[j * width..(j + 1) * width];
                for (o, &v) in out_row.iter_mut().zip(x_row) {
                    *o += a * v;
                }
            }
        }
        Ok(out)
    }
}

/// Left multiplication by a square propagation matrix, dense or sparse.
pub trait Propagator: Sync {
    fn size(&self) -> usize;
    /// `self · x`.
    fn propagate(&self, x: &DenseMatrix) -> Result<DenseMatrix>;
    /// `selfᵀ · x`.
    fn propagate_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix>;
}

impl Propagator for SparseMatrix {
    fn size(&self) -> usize {
        self.rows
    }

    fn propagate(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.matmul_dense(x)
    }

    fn propagate_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.transpose_matmul_dense(x)
    }
}

impl Propagator for DenseMatrix {
    fn size(&self) -> usize {
        self.rows
    }

    fn propagate(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        matmul(self, x)
    }

    fn propagate_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        matmul_tn(self, x)
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃_ii = deg(i) + 1`, in sparse form.
pub fn normalized_adjacency_sparse(g: &Graph) -> SparseMatrix {
    let n = g.n();
    let dt: Vec<f64> = (0..n).map(|v| (g.degree(v) + 1) as f64).collect();
    let entry = |i: usize, j: usize| 1.0 / (dt[i] * dt[j]).sqrt();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(n + 2 * g.edge_count());
    let mut values = Vec::with_capacity(n + 2 * g.edge_count());
    indptr.push(0);
    for i in 0..n {
        // neighbors are sorted; splice the diagonal in order
        let mut diag_done = false;
        for &j in g.neighbors(i) {
            if !diag_done && j > i {
                indices.push(i);
                values.push(1.0 / dt[i]);
                diag_done = true;
            }
            indices.push(j);
            values.push(entry(i, j));
        }
        if !diag_done {
            indices.push(i);
            values.push(1.0 / dt[i]);
        }
        indptr.push(indices.len());
    }
    SparseMatrix {
        rows: n,
        cols: n,
        indptr,
        indices,
        values,
    }
}

/// Dense form of [`normalized_adjacency_sparse`].
pub fn normalized_adjacency(g: &Graph) -> DenseMatrix {
    normalized_adjacency_sparse(g).to_dense()
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Subgradient of ReLU, taken as 0 at exactly 0.
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub const LEAKY_RELU_SLOPE: f64 = 0.2;

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

/// Numerically stable softmax (max subtracted before exponentiation).
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Vector-Jacobian product of softmax: given `alpha = softmax(e)` and
/// `dL/dalpha`, returns `dL/de = alpha ⊙ (g - <alpha, g>)`.
pub fn softmax_backward(alpha: &[f64], grad_alpha: &[f64]) -> Vec<f64> {
    let dot: f64 = alpha.iter().zip(grad_alpha).map(|(a, g)| a * g).sum();
    alpha
        .iter()
        .zip(grad_alpha)
        .map(|(a, g)| a * (g - dot))
        .collect()
}

/// Full Jacobian `diag(alpha) - alpha alphaᵀ`.
pub fn softmax_jacobian(alpha: &[f64]) -> DenseMatrix {
    DenseMatrix::from_fn(alpha.len(), alpha.len(), |i, j| {
        let d = if i == j { alpha[i] } else { 0.0 };
        d - alpha[i] * alpha[j]
    })
}

/// Glorot/Xavier uniform: i.i.d. on `[-L, L)`, `L = sqrt(6 / (f_in + f_out))`.
pub fn glorot_init(f_in: usize, f_out: usize, seed: u64) -> DenseMatrix {
    glorot_init_with(f_in, f_out, &mut Rng64::new(seed))
}

pub fn glorot_init_with(f_in: usize, f_out: usize, rng: &mut Rng64) -> DenseMatrix {
    let limit = glorot_limit(f_in, f_out);
    DenseMatrix::from_fn(f_in, f_out, |_, _| rng.uniform_in(-limit, limit))
}

pub fn glorot_limit(f_in: usize, f_out: usize) -> f64 {
    (6.0 / (f_in + f_out) as f64).sqrt()
}

pub const DEFAULT_LOG_FLOOR: f64 = 1e-12;

/// Regression loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// Mean squared error.
    Mse,
    /// Mean squared error between `ln(max(·, log_floor))` of prediction
    /// and target.
    LogMse { log_floor: f64 },
}

impl LossKind {
    pub fn log_mse() -> Self {
        LossKind::LogMse {
            log_floor: DEFAULT_LOG_FLOOR,
        }
    }

    fn check(&self, pred: &[f64], target: &[f64]) -> Result<()> {
        if pred.len() != target.len() {
            return Err(Error::DimensionMismatch(format!(
                "loss: {} predictions for {} targets",
                pred.len(),
                target.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::InvalidInput("loss over an empty batch".into()));
        }
        if let LossKind::LogMse { log_floor } = *self {
            if !(log_floor > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "log floor must be positive, got {log_floor}"
                )));
            }
            if let Some(t) = target.iter().find(|&&t| !(t > 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "log loss needs positive targets, got {t}"
                )));
            }
        }
        Ok(())
    }
}

pub fn loss(pred: &[f64], target: &[f64], kind: LossKind) -> Result<f64> {
    kind.check(pred, target)?;
    let n = pred.len() as f64;
    let sum: f64 = match kind {
        LossKind::Mse => pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum(),
        LossKind::LogMse { log_floor } => pred
            .iter()
            .zip(target)
            .map(|(p, t)| (p.max(log_floor).ln() - t.max(log_floor).ln()).powi(2))
            .sum(),
    };
    Ok(sum / n)
}

/// `dL/dpred`, elementwise.
pub fn loss_grad(pred: &[f64], target: &[f64], kind: LossKind) -> Result<Vec<f64>> {
    kind.check(pred, target)?;
    let scale = 2.0 / pred.len() as f64;
    Ok(match kind {
        LossKind::Mse => pred
            .iter()
            .zip(target)
            .map(|(p, t)| scale * (p - t))
            .collect(),
        LossKind::LogMse { log_floor } => pred
            .iter()
            .zip(target)
            .map(|(&p, &t)| {
                if p > log_floor {
                    scale * (p.ln() - t.max(log_floor).ln()) / p
                } else {
                    0.0
                }
            })
            .collect(),
    })
}
