//! Central finite-difference check of the hand-written gradients.
//!
//! The objective is the MSE batch loss of two small random graphs with
//! random features and targets. Every parameter is perturbed by `±h`; a
//! coordinate whose perturbation flips the sign of any ReLU or LeakyReLU
//! input is skipped, because the loss is not differentiable there.

use serde::Serialize;

use crate::data::LabeledGraph;
use crate::error::{Error, Result};
use crate::gat::{gat_forward, Mode};
use crate::gcn::gcn_forward;
use crate::graph::{is_connected, make_er, make_path, make_star, Graph};
use crate::kernels::{loss, DenseMatrix, LossKind};
use crate::model::{Model, ModelConfig, ModelKind};
use crate::optim::ParamSet;
use crate::rng::Rng64;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckOptions {
    pub model: ModelConfig,
    pub step: f64,
    /// Denominator floor of the relative error.
    pub floor: f64,
    /// Check the GAT with dropout masks active (fixed by the seed).
    pub train_mode: bool,
}

impl GradcheckOptions {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            model: ModelConfig::default_for(kind),
            step: 1e-6,
            floor: 1e-5,
            train_mode: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub model: ModelKind,
    pub seed: u64,
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
    pub tensors: Vec<TensorCheck>,
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn random_connected(n: usize, rng: &mut Rng64) -> Result<Graph> {
    loop {
        let g = make_er(n, 0.4, rng.next_u64())?;
        if is_connected(&g) {
            return Ok(g);
        }
    }
}

/// Two graphs with `n ∈ [5, 10]`: one random connected graph and one star
/// or path, with uniform random features and targets.
pub fn check_batch(seed: u64, in_dim: usize) -> Result<Vec<LabeledGraph>> {
    let mut rng = Rng64::new(seed);
    let n1 = rng.range_inclusive(5, 10);
    let n2 = rng.range_inclusive(5, 10);
    let g1 = random_connected(n1, &mut rng)?;
    let g2 = if rng.uniform() < 0.5 {
        make_star(n2)?
    } else {
        make_path(n2)?
    };
    [g1, g2]
        .into_iter()
        .enumerate()
        .map(|(k, g)| {
            let target = rng.uniform_in(0.05, 0.9);
            let mut item = LabeledGraph::with_target(format!("check-{k}"), g, "check", seed, target)?;
            item.features = DenseMatrix::from_fn(item.n(), in_dim, |_, _| rng.uniform());
            Ok(item)
        })
        .collect()
}

/// Loss and the sign pattern of every rectifier input.
fn loss_and_signature(
    model: &Model,
    batch: &[LabeledGraph],
    mode: Mode,
) -> Result<(f64, Vec<bool>)> {
    let mut preds = Vec::with_capacity(batch.len());
    let mut signs = Vec::new();
    for (i, item) in batch.iter().enumerate() {
        match model {
            Model::Gcn(p) => {
                let (yhat, acts) = gcn_forward(p, &item.ahat, &item.features)?;
                for q in &acts.pre {
                    signs.extend(q.data().iter().map(|&x| x > 0.0));
                }
                preds.push(yhat);
            }
            Model::Gat(p) => {
                let item_mode = crate::gat::item_mode(mode, i);
                let (yhat, acts) = gat_forward(p, &item.graph, &item.features, item_mode)?;
                for layer in &acts.layers {
                    signs.extend(layer.pre_activation().data().iter().map(|&x| x > 0.0));
                    for head in layer.heads() {
                        signs.extend(head.logits().iter().map(|&x| x > 0.0));
                    }
                }
                preds.push(yhat);
            }
        }
    }
    let targets: Vec<f64> = batch.iter().map(|b| b.target).collect();
    Ok((loss(&preds, &targets, LossKind::Mse)?, signs))
}

/// Compare analytic and finite-difference gradients for every parameter on
/// the two-graph batch drawn from `seed`.
pub fn gradcheck(opts: &GradcheckOptions, seed: u64) -> Result<GradcheckReport> {
    let in_dim = match &opts.model {
        ModelConfig::Gcn(c) => c.in_dim,
        ModelConfig::Gat(c) => c.in_dim,
    };
    let batch = check_batch(seed, in_dim)?;
    let mut model = Model::init(&opts.model, Rng64::derive_seed(seed, &[1]))?;
    model.set_bias(Rng64::new(seed ^ 0x5eed).uniform_in(-0.5, 0.5));
    let mode = if opts.train_mode {
        Mode::Train {
            seed: Rng64::derive_seed(seed, &[2]),
        }
    } else {
        Mode::Eval
    };
    let mut report = gradcheck_model(&mut model, &batch, mode, opts.step, opts.floor)?;
    report.seed = seed;
    Ok(report)
}

/// Finite-difference check of `model` on an arbitrary batch under the MSE
/// loss. Parameters are restored before returning.
pub fn gradcheck_model(
    model: &mut Model,
    batch: &[LabeledGraph],
    mode: Mode,
    step: f64,
    floor: f64,
) -> Result<GradcheckReport> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("gradcheck batch is empty".into()));
    }
    let refs: Vec<&LabeledGraph> = batch.iter().collect();
    let (_, grads) = model.batch_step(&refs, LossKind::Mse, mode)?;
    let (_, base_sig) = loss_and_signature(model, batch, mode)?;
    let names = model.tensor_names();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let h = step;
    let mut tensors = Vec::with_capacity(names.len());
    for (t, name) in names.into_iter().enumerate() {
        let len = analytic[t].len();
        let mut check = TensorCheck {
            name,
            checked: 0,
            skipped: 0,
            max_rel_error: 0.0,
        };
        for i in 0..len {
            let orig = model.tensors()[t][i];
            model.tensors_mut()[t][i] = orig + h;
            let (up, sig_up) = loss_and_signature(model, batch, mode)?;
            model.tensors_mut()[t][i] = orig - h;
            let (down, sig_down) = loss_and_signature(model, batch, mode)?;
            model.tensors_mut()[t][i] = orig;
            if sig_up != base_sig || sig_down != base_sig {
                check.skipped += 1;
                continue;
            }
            let fd = (up - down) / (2.0 * h);
            let err = relative_error(analytic[t][i], fd, floor);
            if !err.is_finite() {
                return Err(Error::NumericFailure(format!(
                    "{}[{i}]: analytic {}, numeric {fd}",
                    check.name, analytic[t][i]
                )));
            }
            check.max_rel_error = check.max_rel_error.max(err);
            check.checked += 1;
        }
        tensors.push(check);
    }
    Ok(GradcheckReport {
        model: model.kind(),
        seed: 0,
        max_rel_error: tensors.iter().map(|c| c.max_rel_error).fold(0.0, f64::max),
        checked: tensors.iter().map(|c| c.checked).sum(),
        skipped: tensors.iter().map(|c| c.skipped).sum(),
        tensors,
    })
}
