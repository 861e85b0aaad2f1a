//! Steady-state localization of linear network dynamics.
//!
//! The crate computes exact localization labels (IPR of the principal
//! eigenvector and its region) for generated or ingested networks, and
//! trains graph neural network regressors, written from scratch with
//! hand-derived gradients, to predict those labels.

pub mod data;
pub mod error;
pub mod features;
pub mod gat;
pub mod gcn;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod model;
pub mod optim;
pub mod rng;
pub mod spectral;
pub mod train;

pub use error::{Error, Result};
pub use data::{DatasetSpec, LabeledGraph};
pub use graph::{Graph, GraphFamily};
pub use model::{Checkpoint, Model, ModelConfig, ModelKind};
pub use train::{EvalReport, TrainConfig};
pub use kernels::{DenseMatrix, LossKind, SparseMatrix};
pub use rng::Rng64;
pub use spectral::{RegionLabel, RegionThresholds, SpectralResult};
