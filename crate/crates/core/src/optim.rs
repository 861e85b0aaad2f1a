//! Gradient descent, Adam (L2 penalty added to the gradient) and AdamW
//! (decoupled multiplicative weight decay).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gat::GatParams;
use crate::gcn::GcnParams;

/// A set of named parameter tensors viewed as flat slices. Gradients use
/// the same type, so tensor order and lengths line up.
pub trait ParamSet {
    fn tensor_names(&self) -> Vec<String>;
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl ParamSet for Vec<f64> {
    fn tensor_names(&self) -> Vec<String> {
        vec!["w".into()]
    }

    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

impl ParamSet for GcnParams {
    fn tensor_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.weights.len()).map(|l| format!("W{l}")).collect();
        names.push("W_lin".into());
        names.push("b".into());
        names
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.weights.iter().map(|w| w.data()).collect();
        out.push(&self.w_lin);
        out.push(std::slice::from_ref(&self.b));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.weights.iter_mut().map(|w| w.data_mut()).collect();
        out.push(&mut self.w_lin);
        out.push(std::slice::from_mut(&mut self.b));
        out
    }
}

impl ParamSet for GatParams {
    fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (l, heads) in self.layers.iter().enumerate() {
            for k in 0..heads.len() {
                names.push(format!("L{l}H{k}.W"));
                names.push(format!("L{l}H{k}.a"));
            }
        }
        names.push("W_lin".into());
        names.push("b".into());
        names
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for head in self.layers.iter().flatten() {
            out.push(head.w.data());
            out.push(&head.a);
        }
        out.push(&self.w_lin);
        out.push(std::slice::from_ref(&self.b));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for head in self.layers.iter_mut().flatten() {
            out.push(head.w.data_mut());
            out.push(&mut head.a);
        }
        out.push(&mut self.w_lin);
        out.push(std::slice::from_mut(&mut self.b));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Gd,
    Adam,
    AdamW,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_betas")]
    pub betas: (f64, f64),
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_betas() -> (f64, f64) {
    (0.9, 0.999)
}

fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn gd(lr: f64) -> Self {
        Self::new(OptimizerKind::Gd, lr, 0.0)
    }

    pub fn adam(lr: f64, weight_decay: f64) -> Self {
        Self::new(OptimizerKind::Adam, lr, weight_decay)
    }

    pub fn adamw(lr: f64, weight_decay: f64) -> Self {
        Self::new(OptimizerKind::AdamW, lr, weight_decay)
    }

    pub fn new(kind: OptimizerKind, lr: f64, weight_decay: f64) -> Self {
        Self {
            kind,
            lr,
            weight_decay,
            betas: default_betas(),
            eps: default_eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (b1, b2) = self.betas;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParams(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "weight decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2) && self.eps > 0.0) {
            return Err(Error::InvalidParams(format!(
                "need betas in [0, 1) and eps > 0, got {:?} and {}",
                self.betas, self.eps
            )));
        }
        Ok(())
    }
}

/// Optimizer state: configuration, step count and moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new<P: ParamSet>(config: OptimizerConfig, params: &P) -> Result<Self> {
        config.validate()?;
        let zeros = || params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Ok(Self {
            config,
            t: 0,
            m: zeros(),
            v: zeros(),
        })
    }

    /// Apply one update. `grads` must share the layout of `params`.
    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        match self.config.kind {
            OptimizerKind::Gd => {
                let (lr, wd) = (self.config.lr, self.config.weight_decay);
                for_each_pair(params, grads, |p, g| {
                    for (x, &d) in p.iter_mut().zip(g) {
                        *x -= lr * (d + wd * *x);
                    }
                })
            }
            OptimizerKind::Adam | OptimizerKind::AdamW => adam_step(self, params, grads),
        }
    }
}

fn for_each_pair<P: ParamSet>(
    params: &mut P,
    grads: &P,
    mut f: impl FnMut(&mut [f64], &[f64]),
) -> Result<()> {
    let gs = grads.tensors();
    let mut ps = params.tensors_mut();
    check_layout(ps.iter().map(|p| p.len()), gs.iter().map(|g| g.len()))?;
    for (p, g) in ps.iter_mut().zip(gs) {
        f(p, g);
    }
    Ok(())
}

fn check_layout(
    a: impl ExactSizeIterator<Item = usize>,
    b: impl ExactSizeIterator<Item = usize>,
) -> Result<()> {
    let a: Vec<usize> = a.collect();
    let b: Vec<usize> = b.collect();
    if a != b {
        return Err(Error::DimensionMismatch(format!(
            "parameter tensor lengths {a:?} vs gradient lengths {b:?}"
        )));
    }
    Ok(())
}

/// `p ← p − η g` for every tensor.
pub fn gd_step<P: ParamSet>(params: &mut P, grads: &P, lr: f64) -> Result<()> {
    for_each_pair(params, grads, |p, g| {
        for (x, &d) in p.iter_mut().zip(g) {
            *x -= lr * d;
        }
    })
}

/// One Adam or AdamW step with bias correction.
pub fn adam_step<P: ParamSet>(state: &mut OptimizerState, params: &mut P, grads: &P) -> Result<()> {
    let cfg = state.config;
    let gs = grads.tensors();
    let mut ps = params.tensors_mut();
    check_layout(ps.iter().map(|p| p.len()), gs.iter().map(|g| g.len()))?;
    check_layout(ps.iter().map(|p| p.len()), state.m.iter().map(|m| m.len()))?;
    state.t += 1;
    let (b1, b2) = cfg.betas;
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let decoupled = cfg.kind == OptimizerKind::AdamW;
    let decay = 1.0 - cfg.lr * cfg.weight_decay;
    for (k, (p, g)) in ps.iter_mut().zip(gs).enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..p.len() {
            let grad = if decoupled {
                g[i]
            } else {
                g[i] + cfg.weight_decay * p[i]
            };
            m[i] = b1 * m[i] + (1.0 - b1) * grad;
            v[i] = b2 * v[i] + (1.0 - b2) * grad * grad;
            if decoupled {
                p[i] *= decay;
            }
            p[i] -= cfg.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.eps);
        }
    }
    Ok(())
}
