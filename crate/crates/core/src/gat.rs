//! Graph attention regressor: a multi-head attention layer (heads
//! concatenated), a single-head attention layer, ReLU after each, mean-pool
//! readout and a linear head.
//!
//! For one head with input `X`, weights `W` and attention vector
//! `a = [a1 ‖ a2]`:
//!
//! ```text
//! Z     = X W
//! e_ij  = LeakyReLU(a1·Z_i + a2·Z_j)      j ∈ N(i) ∪ {i}
//! α_i·  = softmax(e_i·)
//! out_i = Σ_j α_ij Z_j
//! ```
//!
//! In training mode dropout is applied to each layer input and to the
//! normalized attention coefficients, with masks drawn from a seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledGraph;
use crate::error::{Error, Result};
use crate::features::FEATURE_DIM;
use crate::gcn::{readout_head, single_loss_and_grad, REDUCE_CHUNK};
use crate::graph::Graph;
use crate::kernels::{
    glorot_init_with, leaky_relu, leaky_relu_grad, matmul, matmul_nt, matmul_tn, relu,
    relu_grad, softmax, softmax_backward, DenseMatrix, LossKind, LEAKY_RELU_SLOPE,
};
use crate::rng::Rng64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatConfig {
    pub in_dim: usize,
    /// Heads in the first layer; their outputs are concatenated.
    pub heads: usize,
    /// Output width of each first-layer head.
    pub head_width: usize,
    /// Output width of the single second-layer head.
    pub out_width: usize,
    pub dropout: f64,
    pub negative_slope: f64,
}

impl Default for GatConfig {
    fn default() -> Self {
        Self {
            in_dim: FEATURE_DIM,
            heads: 4,
            head_width: 16,
            out_width: 64,
            dropout: 0.6,
            negative_slope: LEAKY_RELU_SLOPE,
        }
    }
}

impl GatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.heads == 0 || self.head_width == 0 || self.out_width == 0 {
            return Err(Error::InvalidParams(format!("GAT widths must be positive: {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParams(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(self.negative_slope >= 0.0 && self.negative_slope.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "negative slope must be nonnegative, got {}",
                self.negative_slope
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead {
    pub w: DenseMatrix,
    /// `[a1 ‖ a2]`, length `2 · w.cols()`.
    pub a: Vec<f64>,
}

impl AttentionHead {
    fn init(f_in: usize, f_out: usize, rng: &mut Rng64) -> Self {
        let w = glorot_init_with(f_in, f_out, rng);
        let a = glorot_init_with(2 * f_out, 1, rng).into_vec();
        Self { w, a }
    }

    pub fn width(&self) -> usize {
        self.w.cols()
    }

    fn zeros_like(&self) -> Self {
        Self {
            w: DenseMatrix::zeros(self.w.rows(), self.w.cols()),
            a: vec![0.0; self.a.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatParams {
    /// `layers[0]` holds the concatenated heads, `layers[1]` the single head.
    pub layers: Vec<Vec<AttentionHead>>,
    pub w_lin: Vec<f64>,
    pub b: f64,
    pub dropout: f64,
    pub negative_slope: f64,
}

pub type GatGradients = GatParams;

impl GatParams {
    pub fn init(cfg: &GatConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = Rng64::new(seed);
        let first = (0..cfg.heads)
            .map(|_| AttentionHead::init(cfg.in_dim, cfg.head_width, &mut rng))
            .collect();
        let second = vec![AttentionHead::init(
            cfg.heads * cfg.head_width,
            cfg.out_width,
            &mut rng,
        )];
        let w_lin = glorot_init_with(cfg.out_width, 1, &mut rng).into_vec();
        Ok(Self {
            layers: vec![first, second],
            w_lin,
            b: 0.0,
            dropout: cfg.dropout,
            negative_slope: cfg.negative_slope,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|heads| heads.iter().map(AttentionHead::zeros_like).collect())
                .collect(),
            w_lin: vec![0.0; self.w_lin.len()],
            b: 0.0,
            dropout: self.dropout,
            negative_slope: self.negative_slope,
        }
    }

    pub fn config(&self) -> GatConfig {
        GatConfig {
            in_dim: self.layers[0][0].w.rows(),
            heads: self.layers[0].len(),
            head_width: self.layers[0][0].width(),
            out_width: self.layers[1][0].width(),
            dropout: self.dropout,
            negative_slope: self.negative_slope,
        }
    }

    pub fn accumulate(&mut self, other: &GatParams) -> Result<()> {
        for (la, lb) in self.layers.iter_mut().zip(&other.layers) {
            for (ha, hb) in la.iter_mut().zip(lb) {
                ha.w.add_assign(&hb.w)?;
                for (x, y) in ha.a.iter_mut().zip(&hb.a) {
                    *x += y;
                }
            }
        }
        for (x, y) in self.w_lin.iter_mut().zip(&other.w_lin) {
            *x += y;
        }
        self.b += other.b;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .flatten()
            .all(|h| h.w.is_finite() && h.a.iter().all(|x| x.is_finite()))
            && self.w_lin.iter().all(|x| x.is_finite())
            && self.b.is_finite()
    }
}

/// Attention neighborhoods `N(i) ∪ {i}` in CSR layout, sorted per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhoods {
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl Neighborhoods {
    pub fn from_graph(g: &Graph) -> Self {
        let mut indptr = Vec::with_capacity(g.n() + 1);
        let mut indices = Vec::with_capacity(g.n() + 2 * g.edge_count());
        indptr.push(0);
        for i in 0..g.n() {
            let nb = g.neighbors(i);
            let split = nb.partition_point(|&j| j < i);
            indices.extend_from_slice(&nb[..split]);
            indices.push(i);
            indices.extend_from_slice(&nb[split..]);
            indptr.push(indices.len());
        }
        Self { indptr, indices }
    }

    pub fn n(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    fn span(&self, i: usize) -> std::ops::Range<usize> {
        self.indptr[i]..self.indptr[i + 1]
    }

    fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// `e_ij = LeakyReLU(a1·Wh_i + a2·Wh_j)`; `a` has length `2F`.
pub fn attention_scores(wh_i: &[f64], wh_j: &[f64], a: &[f64], slope: f64) -> Result<f64> {
    let f = wh_i.len();
    if wh_j.len() != f || a.len() != 2 * f {
        return Err(Error::DimensionMismatch(format!(
            "attention: |Wh_i| = {f}, |Wh_j| = {}, |a| = {}",
            wh_j.len(),
            a.len()
        )));
    }
    Ok(leaky_relu(dot(&a[..f], wh_i) + dot(&a[f..], wh_j), slope))
}

/// Softmax over one neighborhood.
pub fn attention_normalize(scores: &[f64]) -> Vec<f64> {
    softmax(scores)
}

/// Forward mode. Training mode applies seeded dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train { seed: u64 },
    Eval,
}

/// Cache of one attention head.
#[derive(Debug, Clone)]
pub struct HeadCache {
    /// `Z = X W`.
    z: DenseMatrix,
    /// Pre-LeakyReLU score per neighborhood entry.
    logits: Vec<f64>,
    /// Normalized attention per neighborhood entry.
    alpha: Vec<f64>,
    /// Dropout scale per neighborhood entry (0 or `1/(1-p)`), when training.
    keep: Option<Vec<f64>>,
}

impl HeadCache {
    /// Attention coefficients actually used in aggregation.
    fn effective(&self, k: usize) -> f64 {
        match &self.keep {
            Some(keep) => self.alpha[k] * keep[k],
            None => self.alpha[k],
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Attention scores before the LeakyReLU.
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
}

/// Cache of one attention layer.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Layer input after dropout.
    input: DenseMatrix,
    /// Dropout scale per input entry, when training.
    input_keep: Option<Vec<f64>>,
    heads: Vec<HeadCache>,
    /// Concatenated head outputs before ReLU.
    pre: DenseMatrix,
}

impl LayerCache {
    pub fn heads(&self) -> &[HeadCache] {
        &self.heads
    }

    pub fn pre_activation(&self) -> &DenseMatrix {
        &self.pre
    }
}

#[derive(Debug, Clone)]
pub struct GatActivations {
    pub nbhd: Neighborhoods,
    pub layers: Vec<LayerCache>,
    pub h_last: DenseMatrix,
    pub z: Vec<f64>,
    pub yhat: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dropout_scales(len: usize, p: f64, rng: &mut Rng64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.uniform() < p { 0.0 } else { keep })
        .collect()
}

fn head_forward(
    head: &AttentionHead,
    x: &DenseMatrix,
    nbhd: &Neighborhoods,
    slope: f64,
    attn_drop: Option<(f64, &mut Rng64)>,
    out: &mut DenseMatrix,
    col0: usize,
) -> Result<HeadCache> {
    let f = head.width();
    if head.a.len() != 2 * f {
        return Err(Error::DimensionMismatch(format!(
            "attention vector of length {} for head width {f}",
            head.a.len()
        )));
    }
    let z = matmul(x, &head.w)?;
    let (a1, a2) = head.a.split_at(f);
    let n = z.rows();
    let s1: Vec<f64> = (0..n).map(|i| dot(z.row(i), a1)).collect();
    let s2: Vec<f64> = (0..n).map(|i| dot(z.row(i), a2)).collect();
    let mut logits = Vec::with_capacity(nbhd.nnz());
    let mut alpha = Vec::with_capacity(nbhd.nnz());
    let mut scores = Vec::new();
    for i in 0..n {
        scores.clear();
        for &j in nbhd.row(i) {
            let pre = s1[i] + s2[j];
            logits.push(pre);
            scores.push(leaky_relu(pre, slope));
        }
        alpha.extend(softmax(&scores));
    }
    let keep = attn_drop.map(|(p, rng)| dropout_scales(alpha.len(), p, rng));
    let cache = HeadCache {
        z,
        logits,
        alpha,
        keep,
    };
    for i in 0..n {
        let out_row = &mut out.row_mut(i)[col0..col0 + f];
        for k in nbhd.span(i) {
            let j = nbhd.indices[k];
            let c = cache.effective(k);
            for (o, &v) in out_row.iter_mut().zip(cache.z.row(j)) {
                *o += c * v;
            }
        }
    }
    Ok(cache)
}

/// One attention layer: heads concatenated, then ReLU. Returns the layer
/// output and its cache.
pub fn gat_layer(
    heads: &[AttentionHead],
    nbhd: &Neighborhoods,
    h_in: &DenseMatrix,
    slope: f64,
    dropout: Option<(f64, &mut Rng64)>,
) -> Result<(DenseMatrix, LayerCache)> {
    if nbhd.n() != h_in.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} neighborhoods for {} feature rows",
            nbhd.n(),
            h_in.rows()
        )));
    }
    if let Some(h) = heads.iter().find(|h| h.w.rows() != h_in.cols()) {
        return Err(Error::DimensionMismatch(format!(
            "head expects {} input columns, got {}",
            h.w.rows(),
            h_in.cols()
        )));
    }
    let total: usize = heads.iter().map(AttentionHead::width).sum();
    let mut pre = DenseMatrix::zeros(h_in.rows(), total);
    let (input, input_keep, mut rng) = match dropout {
        Some((p, rng)) => {
            let keep = dropout_scales(h_in.data().len(), p, rng);
            let mut x = h_in.clone();
            for (v, k) in x.data_mut().iter_mut().zip(&keep) {
                *v *= k;
            }
            (x, Some(keep), Some((p, rng)))
        }
        None => (h_in.clone(), None, None),
    };
    let mut caches = Vec::with_capacity(heads.len());
    let mut col = 0;
    for head in heads {
        let drop = rng.as_mut().map(|(p, r)| (*p, &mut **r));
        caches.push(head_forward(head, &input, nbhd, slope, drop, &mut pre, col)?);
        col += head.width();
    }
    let out = pre.map(relu);
    Ok((
        out,
        LayerCache {
            input,
            input_keep,
            heads: caches,
            pre,
        },
    ))
}

pub fn gat_forward(
    params: &GatParams,
    g: &Graph,
    h0: &DenseMatrix,
    mode: Mode,
) -> Result<(f64, GatActivations)> {
    let nbhd = Neighborhoods::from_graph(g);
    let mut h = h0.clone();
    let mut layers = Vec::with_capacity(params.layers.len());
    for (l, heads) in params.layers.iter().enumerate() {
        let mut rng = match mode {
            Mode::Train { seed } if params.dropout > 0.0 => {
                Some(Rng64::new(Rng64::derive_seed(seed, &[l as u64])))
            }
            _ => None,
        };
        let drop = rng.as_mut().map(|r| (params.dropout, r));
        let (out, cache) = gat_layer(heads, &nbhd, &h, params.negative_slope, drop)?;
        layers.push(cache);
        h = out;
    }
    let z = h.column_means();
    let yhat = readout_head(&z, &params.w_lin, params.b)?;
    Ok((
        yhat,
        GatActivations {
            nbhd,
            layers,
            h_last: h,
            z,
            yhat,
        },
    ))
}

pub fn gat_predict(params: &GatParams, g: &Graph, h0: &DenseMatrix) -> Result<f64> {
    Ok(gat_forward(params, g, h0, Mode::Eval)?.0)
}

/// Backward through one head. Adds the head's contribution to `dx` (the
/// gradient w.r.t. the post-dropout layer input) and returns its parameter
/// gradient.
fn head_backward(
    head: &AttentionHead,
    cache: &HeadCache,
    input: &DenseMatrix,
    nbhd: &Neighborhoods,
    slope: f64,
    dout: &DenseMatrix,
    col0: usize,
    dx: &mut DenseMatrix,
) -> Result<AttentionHead> {
    let f = head.width();
    let n = input.rows();
    let (a1, a2) = head.a.split_at(f);
    let mut dz = DenseMatrix::zeros(n, f);
    let mut ds1 = vec![0.0; n];
    let mut ds2 = vec![0.0; n];
    let mut d_alpha = Vec::new();
    for i in 0..n {
        let dout_i = &dout.row(i)[col0..col0 + f];
        let span = nbhd.span(i);
        d_alpha.clear();
        for k in span.clone() {
            let j = nbhd.indices[k];
            // out_i = Σ_j c_ij Z_j
            let c = cache.effective(k);
            for (d, &g) in dz.row_mut(j).iter_mut().zip(dout_i) {
                *d += c * g;
            }
            let mut da = dot(dout_i, cache.z.row(j));
            if let Some(keep) = &cache.keep {
                da *= keep[k];
            }
            d_alpha.push(da);
        }
        let de = softmax_backward(&cache.alpha[span.clone()], &d_alpha);
        for (k, de_k) in span.zip(de) {
            let j = nbhd.indices[k];
            let dpre = de_k * leaky_relu_grad(cache.logits[k], slope);
            ds1[i] += dpre;
            ds2[j] += dpre;
        }
    }
    let mut grad = head.zeros_like();
    let (ga1, ga2) = grad.a.split_at_mut(f);
    for i in 0..n {
        let zi = cache.z.row(i);
        for c in 0..f {
            ga1[c] += ds1[i] * zi[c];
            ga2[c] += ds2[i] * zi[c];
        }
        let dzi = dz.row_mut(i);
        for c in 0..f {
            dzi[c] += ds1[i] * a1[c] + ds2[i] * a2[c];
        }
    }
    grad.w = matmul_tn(input, &dz)?;
    dx.add_assign(&matmul_nt(&dz, &head.w)?)?;
    Ok(grad)
}

pub fn gat_backward(
    params: &GatParams,
    acts: &GatActivations,
    dl_dyhat: f64,
) -> Result<GatGradients> {
    if acts.layers.len() != params.layers.len() || acts.z.len() != params.w_lin.len() {
        return Err(Error::DimensionMismatch(
            "activations do not match these parameters".into(),
        ));
    }
    let mut grads = params.zeros_like();
    grads.b = dl_dyhat;
    grads.w_lin = acts.z.iter().map(|z| dl_dyhat * z).collect();
    let n = acts.h_last.rows();
    let scale = dl_dyhat / n as f64;
    let row: Vec<f64> = params.w_lin.iter().map(|w| scale * w).collect();
    let mut dh = DenseMatrix::from_fn(n, row.len(), |_, j| row[j]);
    for l in (0..params.layers.len()).rev() {
        let cache = &acts.layers[l];
        let heads = &params.layers[l];
        if cache.pre.shape() != dh.shape() || cache.heads.len() != heads.len() {
            return Err(Error::DimensionMismatch(format!(
                "layer {l}: cache does not match the parameters"
            )));
        }
        let mut dpre = dh;
        for (d, &x) in dpre.data_mut().iter_mut().zip(cache.pre.data()) {
            *d *= relu_grad(x);
        }
        let mut dx = DenseMatrix::zeros(cache.input.rows(), cache.input.cols());
        let mut col = 0;
        for (k, head) in heads.iter().enumerate() {
            grads.layers[l][k] = head_backward(
                head,
                &cache.heads[k],
                &cache.input,
                &acts.nbhd,
                params.negative_slope,
                &dpre,
                col,
                &mut dx,
            )?;
            col += head.width();
        }
        if let Some(keep) = &cache.input_keep {
            for (d, k) in dx.data_mut().iter_mut().zip(keep) {
                *d *= k;
            }
        }
        dh = dx;
    }
    Ok(grads)
}

/// Mode of batch item `index`: training seeds are derived per item.
pub fn item_mode(mode: Mode, index: usize) -> Mode {
    match mode {
        Mode::Train { seed } => Mode::Train {
            seed: Rng64::derive_seed(seed, &[index as u64]),
        },
        Mode::Eval => Mode::Eval,
    }
}

/// Mean loss over `batch` and the summed gradient. In training mode the
/// dropout seed of item `i` is derived from `(seed, i)`.
pub fn batch_step(
    params: &GatParams,
    batch: &[&LabeledGraph],
    kind: LossKind,
    mode: Mode,
) -> Result<(f64, GatGradients)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let inv_n = 1.0 / batch.len() as f64;
    let partials: Vec<Result<(f64, GatGradients)>> = batch
        .par_chunks(REDUCE_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut loss = 0.0;
            let mut grads = params.zeros_like();
            for (k, item) in chunk.iter().enumerate() {
                let item_mode = item_mode(mode, c * REDUCE_CHUNK + k);
                let (yhat, acts) = gat_forward(params, &item.graph, &item.features, item_mode)?;
                let (l, g) = single_loss_and_grad(yhat, item.target, kind)?;
                loss += l;
                grads.accumulate(&gat_backward(params, &acts, g * inv_n)?)?;
            }
            Ok((loss, grads))
        })
        .collect();
    let mut loss = 0.0;
    let mut grads = params.zeros_like();
    for part in partials {
        let (l, g) = part?;
        loss += l;
        grads.accumulate(&g)?;
    }
    Ok((loss * inv_n, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_cycle, make_star};

    #[test]
    fn score_examples() {
        let s = attention_scores(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0, 1.0, -1.0], 0.2).unwrap();
        assert_eq!(s, 0.0);
        let s = attention_scores(&[0.3, -2.0], &[5.0, 1.0], &[0.0; 4], 0.2).unwrap();
        assert_eq!(s, 0.0);
        assert!(attention_scores(&[1.0], &[1.0, 2.0], &[0.0; 4], 0.2).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert!(attention_normalize(&[0.4; 4]).iter().all(|&a| a == 0.25));
        let a = attention_normalize(&[2f64.ln(), 0.0]);
        assert!((a[0] - 2.0 / 3.0).abs() < 1e-15 && (a[1] - 1.0 / 3.0).abs() < 1e-15);
        let b = attention_normalize(&[2f64.ln() + 7.5, 7.5]);
        assert!((a[0] - b[0]).abs() < 1e-12);
    }

    #[test]
    fn neighborhoods_include_self() {
        let nb = Neighborhoods::from_graph(&make_star(4).unwrap());
        assert_eq!(nb.row(0), &[0, 1, 2, 3]);
        assert_eq!(nb.row(2), &[0, 2]);
    }

    #[test]
    fn single_node_layer() {
        let g = Graph::new(1, []).unwrap();
        let nb = Neighborhoods::from_graph(&g);
        let mut rng = Rng64::new(2);
        let head = AttentionHead::init(3, 2, &mut rng);
        let x = DenseMatrix::from_rows(&[&[0.5, -1.0, 2.0]]);
        let (out, cache) = gat_layer(&[head.clone()], &nb, &x, 0.2, None).unwrap();
        assert_eq!(cache.heads()[0].alpha(), &[1.0]);
        let expect = matmul(&x, &head.w).unwrap().map(relu);
        assert_eq!(out, expect);
    }

    #[test]
    fn regular_graph_identical_rows() {
        let g = make_cycle(6).unwrap();
        let x = DenseMatrix::from_fn(6, 7, |_, j| 0.1 * j as f64);
        let p = GatParams::init(&GatConfig::default(), 5).unwrap();
        let (_, acts) = gat_forward(&p, &g, &x, Mode::Eval).unwrap();
        for i in 1..6 {
            assert_eq!(acts.h_last.row(i), acts.h_last.row(0));
        }
    }

    #[test]
    fn eval_and_train_determinism() {
        let g = make_star(7).unwrap();
        let x = crate::features::build_feature_matrix(&g).unwrap();
        let p = GatParams::init(&GatConfig::default(), 9).unwrap();
        let e1 = gat_predict(&p, &g, &x).unwrap();
        assert_eq!(e1, gat_predict(&p, &g, &x).unwrap());
        let t1 = gat_forward(&p, &g, &x, Mode::Train { seed: 4 }).unwrap().0;
        let t2 = gat_forward(&p, &g, &x, Mode::Train { seed: 4 }).unwrap().0;
        assert_eq!(t1, t2);
        let mut zero = p.zeros_like();
        zero.b = -0.25;
        assert_eq!(gat_predict(&zero, &g, &x).unwrap(), -0.25);
    }

    #[test]
    fn zero_upstream_gradient() {
        let g = make_star(7).unwrap();
        let x = crate::features::build_feature_matrix(&g).unwrap();
        let p = GatParams::init(&GatConfig::default(), 9).unwrap();
        let (_, acts) = gat_forward(&p, &g, &x, Mode::Train { seed: 1 }).unwrap();
        assert_eq!(gat_backward(&p, &acts, 0.0).unwrap(), p.zeros_like());
    }
}
