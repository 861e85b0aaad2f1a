//! Model-kind dispatch and JSON checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::LabeledGraph;
use crate::error::{Error, Result};
use crate::gat::{self, GatConfig, GatParams, Mode};
use crate::gcn::{self, GcnConfig, GcnParams};
use crate::kernels::LossKind;
use crate::optim::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gcn,
    Gat,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(ModelKind::Gcn),
            "gat" => Ok(ModelKind::Gat),
            _ => Err(Error::InvalidParams(format!("unknown model kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Gcn(GcnConfig),
    Gat(GatConfig),
}

impl ModelConfig {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Gcn => ModelConfig::Gcn(GcnConfig::default()),
            ModelKind::Gat => ModelConfig::Gat(GatConfig::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Gcn(_) => ModelKind::Gcn,
            ModelConfig::Gat(_) => ModelKind::Gat,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Gcn(c) => c.validate(),
            ModelConfig::Gat(c) => c.validate(),
        }
    }
}

/// A GCN or GAT parameter set. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gcn(GcnParams),
    Gat(GatParams),
}

impl Model {
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        Ok(match cfg {
            ModelConfig::Gcn(c) => Model::Gcn(GcnParams::init(c, seed)?),
            ModelConfig::Gat(c) => Model::Gat(GatParams::init(c, seed)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Gcn(_) => ModelKind::Gcn,
            Model::Gat(_) => ModelKind::Gat,
        }
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            Model::Gcn(p) => ModelConfig::Gcn(p.config()),
            Model::Gat(p) => ModelConfig::Gat(p.config()),
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            Model::Gcn(p) => Model::Gcn(p.zeros_like()),
            Model::Gat(p) => Model::Gat(p.zeros_like()),
        }
    }

    pub fn bias(&self) -> f64 {
        match self {
            Model::Gcn(p) => p.b,
            Model::Gat(p) => p.b,
        }
    }

    pub fn set_bias(&mut self, b: f64) {
        match self {
            Model::Gcn(p) => p.b = b,
            Model::Gat(p) => p.b = b,
        }
    }

    /// Head weights `w_lin`.
    pub fn head_mut(&mut self) -> &mut Vec<f64> {
        match self {
            Model::Gcn(p) => &mut p.w_lin,
            Model::Gat(p) => &mut p.w_lin,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Model::Gcn(p) => p.is_finite(),
            Model::Gat(p) => p.is_finite(),
        }
    }

    /// Evaluation-mode prediction.
    pub fn predict(&self, item: &LabeledGraph) -> Result<f64> {
        match self {
            Model::Gcn(p) => gcn::gcn_predict(p, &item.ahat, &item.features),
            Model::Gat(p) => gat::gat_predict(p, &item.graph, &item.features),
        }
    }

    /// Mean loss and summed gradient over a batch. `mode` only affects
    /// the GAT (dropout).
    pub fn batch_step(
        &self,
        batch: &[&LabeledGraph],
        kind: LossKind,
        mode: Mode,
    ) -> Result<(f64, Model)> {
        Ok(match self {
            Model::Gcn(p) => {
                let (l, g) = gcn::batch_step(p, batch, kind)?;
                (l, Model::Gcn(g))
            }
            Model::Gat(p) => {
                let (l, g) = gat::batch_step(p, batch, kind, mode)?;
                (l, Model::Gat(g))
            }
        })
    }

    /// Names and shapes `(rows, cols)` of each tensor.
    pub fn tensor_shapes(&self) -> Vec<(usize, usize)> {
        match self {
            Model::Gcn(p) => {
                let mut s: Vec<_> = p.weights.iter().map(|w| w.shape()).collect();
                s.push((p.w_lin.len(), 1));
                s.push((1, 1));
                s
            }
            Model::Gat(p) => {
                let mut s = Vec::new();
                for h in p.layers.iter().flatten() {
                    s.push(h.w.shape());
                    s.push((h.a.len(), 1));
                }
                s.push((p.w_lin.len(), 1));
                s.push((1, 1));
                s
            }
        }
    }
}

impl ParamSet for Model {
    fn tensor_names(&self) -> Vec<String> {
        match self {
            Model::Gcn(p) => p.tensor_names(),
            Model::Gat(p) => p.tensor_names(),
        }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        match self {
            Model::Gcn(p) => p.tensors(),
            Model::Gat(p) => p.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Model::Gcn(p) => p.tensors_mut(),
            Model::Gat(p) => p.tensors_mut(),
        }
    }
}

pub const CHECKPOINT_FORMAT: &str = "netloc-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    /// Row-major values.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelConfig,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        let tensors = model
            .tensor_names()
            .into_iter()
            .zip(model.tensor_shapes())
            .zip(model.tensors())
            .map(|((name, (r, c)), values)| TensorRecord {
                name,
                shape: [r, c],
                values: values.to_vec(),
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model: model.config(),
            tensors,
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        let mut model = Model::init(&self.model, 0)?;
        let names = model.tensor_names();
        let shapes = model.tensor_shapes();
        if self.tensors.len() != names.len() {
            return Err(Error::DimensionMismatch(format!(
                "checkpoint has {} tensors, model needs {}",
                self.tensors.len(),
                names.len()
            )));
        }
        for (((rec, name), (r, c)), dst) in self
            .tensors
            .iter()
            .zip(&names)
            .zip(shapes)
            .zip(model.tensors_mut())
        {
            if &rec.name != name || rec.shape != [r, c] || rec.values.len() != dst.len() {
                return Err(Error::DimensionMismatch(format!(
                    "tensor {:?} {:?} does not fit {name:?} [{r}, {c}]",
                    rec.name, rec.shape
                )));
            }
            dst.copy_from_slice(&rec.values);
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut json = serde_json::to_string(self)?;
        json.push('\n');
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::corrupt(path, e.to_string()))?;
        if value.get("format").and_then(|v| v.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(Error::corrupt(path, "not a model checkpoint"));
        }
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if version != u64::from(CHECKPOINT_VERSION) {
            return Err(Error::VersionMismatch {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: CHECKPOINT_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| Error::corrupt(path, e.to_string()))
    }
}
