//! Three-layer GCN regressor: `H(l) = σ(Â H(l-1) W(l-1))`, mean-pool
//! readout `z`, linear head `ŷ = z·w + b`, with a hand-written backward
//! pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledGraph;
use crate::error::{Error, Result};
use crate::features::FEATURE_DIM;
use crate::kernels::{
    glorot_init_with, loss_grad, matmul, matmul_nt, matmul_tn, relu, relu_grad, DenseMatrix,
    LossKind, Propagator,
};
use crate::rng::Rng64;

/// Graphs per parallel work unit. Fixed so that the reduction order, and
/// hence the summed gradient, does not depend on the thread count.
pub(crate) const REDUCE_CHUNK: usize = 8;

/// Node-wise nonlinearity applied after each propagation layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Identity => x,
        }
    }

    pub fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu_grad(x),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnConfig {
    pub in_dim: usize,
    pub widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for GcnConfig {
    fn default() -> Self {
        Self {
            in_dim: FEATURE_DIM,
            widths: vec![64, 64, 64],
            activation: Activation::Relu,
        }
    }
}

impl GcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::InvalidParams(format!(
                "GCN needs positive input and layer widths, got {} and {:?}",
                self.in_dim, self.widths
            )));
        }
        Ok(())
    }
}

/// Learnable parameters `{W(0), …, W(L-1), w_lin, b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub weights: Vec<DenseMatrix>,
    pub w_lin: Vec<f64>,
    pub b: f64,
    pub activation: Activation,
}

/// Gradients share the parameter layout.
pub type GcnGradients = GcnParams;

impl GcnParams {
    /// Glorot-uniform weights and head, zero bias.
    pub fn init(cfg: &GcnConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = Rng64::new(seed);
        let mut fan_in = cfg.in_dim;
        let mut weights = Vec::with_capacity(cfg.widths.len());
        for &w in &cfg.widths {
            weights.push(glorot_init_with(fan_in, w, &mut rng));
            fan_in = w;
        }
        let w_lin = glorot_init_with(fan_in, 1, &mut rng).into_vec();
        Ok(Self {
            weights,
            w_lin,
            b: 0.0,
            activation: cfg.activation,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weights: self
                .weights
                .iter()
                .map(|w| DenseMatrix::zeros(w.rows(), w.cols()))
                .collect(),
            w_lin: vec![0.0; self.w_lin.len()],
            b: 0.0,
            activation: self.activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].rows()
    }

    pub fn config(&self) -> GcnConfig {
        GcnConfig {
            in_dim: self.in_dim(),
            widths: self.weights.iter().map(|w| w.cols()).collect(),
            activation: self.activation,
        }
    }

    /// `self += other`, elementwise.
    pub fn accumulate(&mut self, other: &GcnParams) -> Result<()> {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.add_assign(b)?;
        }
        for (a, b) in self.w_lin.iter_mut().zip(&other.w_lin) {
            *a += b;
        }
        self.b += other.b;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
            && self.w_lin.iter().all(|x| x.is_finite())
            && self.b.is_finite()
    }
}

/// Forward cache of one graph.
#[derive(Debug, Clone)]
pub struct GcnActivations<'a, P: Propagator + ?Sized> {
    pub ahat: &'a P,
    /// `P(l) = Â H(l)`, the propagated layer input.
    pub propagated: Vec<DenseMatrix>,
    /// `Q(l) = P(l) W(l)`, the pre-activation.
    pub pre: Vec<DenseMatrix>,
    /// Output of the last layer, `H(L)`.
    pub h_last: DenseMatrix,
    pub z: Vec<f64>,
    pub yhat: f64,
}

pub fn gcn_forward<'a, P: Propagator + ?Sized>(
    params: &GcnParams,
    ahat: &'a P,
    h0: &DenseMatrix,
) -> Result<(f64, GcnActivations<'a, P>)> {
    if ahat.size() != h0.rows() {
        return Err(Error::DimensionMismatch(format!(
            "propagation matrix of size {} for {} feature rows",
            ahat.size(),
            h0.rows()
        )));
    }
    let layers = params.weights.len();
    let mut propagated = Vec::with_capacity(layers);
    let mut pre = Vec::with_capacity(layers);
    let mut h = h0.clone();
    for w in &params.weights {
        let p = ahat.propagate(&h)?;
        let q = matmul(&p, w)?;
        h = q.map(|x| params.activation.apply(x));
        propagated.push(p);
        pre.push(q);
    }
    let z = h.column_means();
    let yhat = readout_head(&z, &params.w_lin, params.b)?;
    Ok((
        yhat,
        GcnActivations {
            ahat,
            propagated,
            pre,
            h_last: h,
            z,
            yhat,
        },
    ))
}

/// Prediction only.
pub fn gcn_predict<P: Propagator + ?Sized>(
    params: &GcnParams,
    ahat: &P,
    h0: &DenseMatrix,
) -> Result<f64> {
    Ok(gcn_forward(params, ahat, h0)?.0)
}

pub(crate) fn readout_head(z: &[f64], w_lin: &[f64], b: f64) -> Result<f64> {
    if z.len() != w_lin.len() {
        return Err(Error::DimensionMismatch(format!(
            "readout of width {} for a head of width {}",
            z.len(),
            w_lin.len()
        )));
    }
    Ok(z.iter().zip(w_lin).map(|(a, c)| a * c).sum::<f64>() + b)
}

/// Gradient of the loss contribution of one graph, given `dL/dŷ`.
pub fn gcn_backward<P: Propagator + ?Sized>(
    params: &GcnParams,
    acts: &GcnActivations<'_, P>,
    dl_dyhat: f64,
) -> Result<GcnGradients> {
    let layers = params.weights.len();
    if acts.pre.len() != layers || acts.z.len() != params.w_lin.len() {
        return Err(Error::DimensionMismatch(
            "activations do not match these parameters".into(),
        ));
    }
    let mut grads = params.zeros_like();
    grads.b = dl_dyhat;
    grads.w_lin = acts.z.iter().map(|z| dl_dyhat * z).collect();
    // mean pool spreads dz evenly over the n rows of H(L)
    let n = acts.h_last.rows();
    let width = params.w_lin.len();
    let scale = dl_dyhat / n as f64;
    let row: Vec<f64> = params.w_lin.iter().map(|w| scale * w).collect();
    let mut dh = DenseMatrix::from_fn(n, width, |_, j| row[j]);
    for l in (0..layers).rev() {
        let q = &acts.pre[l];
        if q.shape() != dh.shape() {
            return Err(Error::DimensionMismatch(format!(
                "layer {l}: cached pre-activation {:?} vs gradient {:?}",
                q.shape(),
                dh.shape()
            )));
        }
        let act = params.activation;
        let mut dq = dh;
        for (d, &x) in dq.data_mut().iter_mut().zip(q.data()) {
            *d *= act.grad(x);
        }
        grads.weights[l] = matmul_tn(&acts.propagated[l], &dq)?;
        if l > 0 {
            let dp = matmul_nt(&dq, &params.weights[l])?;
            dh = acts.ahat.propagate_transpose(&dp)?;
        } else {
            dh = DenseMatrix::zeros(0, 0);
        }
    }
    Ok(grads)
}

/// Mean loss over `batch` and the summed gradient.
///
/// Graphs are processed in parallel in fixed-size chunks; chunk results are
/// combined in order, so the result is bit-identical for any thread count.
pub fn batch_step(
    params: &GcnParams,
    batch: &[&LabeledGraph],
    kind: LossKind,
) -> Result<(f64, GcnGradients)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let inv_n = 1.0 / batch.len() as f64;
    let partials: Vec<Result<(f64, GcnGradients)>> = batch
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut loss = 0.0;
            let mut grads = params.zeros_like();
            for item in chunk {
                let (yhat, acts) = gcn_forward(params, &item.ahat, &item.features)?;
                let (l, g) = single_loss_and_grad(yhat, item.target, kind)?;
                loss += l;
                grads.accumulate(&gcn_backward(params, &acts, g * inv_n)?)?;
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

/// Loss of one prediction and its derivative, both unscaled by batch size.
pub(crate) fn single_loss_and_grad(yhat: f64, y: f64, kind: LossKind) -> Result<(f64, f64)> {
    if !yhat.is_finite() {
        return Err(Error::NumericFailure(format!("non-finite prediction {yhat}")));
    }
    let l = crate::kernels::loss(&[yhat], &[y], kind)?;
    let g = loss_grad(&[yhat], &[y], kind)?[0];
    Ok((l, g))
}
