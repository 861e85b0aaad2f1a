//! Training loop, evaluation and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledGraph;
use crate::error::{Error, Result};
use crate::gat::Mode;
use crate::kernels::LossKind;
use crate::model::{Model, ModelConfig, ModelKind};
use crate::optim::{OptimizerConfig, OptimizerState, ParamSet};
use crate::rng::Rng64;
use crate::spectral::{classify_region, RegionLabel, RegionThresholds};

pub const TRAIN_SCHEMA_VERSION: u32 = 1;

/// Initial value of the head bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BiasInit {
    Zero,
    /// Mean training target.
    #[default]
    MeanTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub train: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub loss: LossKind,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    /// `None` trains full-batch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub thresholds: RegionThresholds,
    #[serde(default = "default_snapshots")]
    pub snapshot_epochs: Vec<usize>,
    #[serde(default)]
    pub bias_init: BiasInit,
    #[serde(default)]
    pub dataset: Option<DatasetPaths>,
}

fn default_snapshots() -> Vec<usize> {
    vec![0, 1, 2, 3, 4]
}

impl TrainConfig {
    /// GCN: Adam (lr 0.01, weight decay 5e-4), MSE, 500 epochs, full batch.
    pub fn gcn_default() -> Self {
        Self {
            schema_version: TRAIN_SCHEMA_VERSION,
            model: ModelConfig::default_for(ModelKind::Gcn),
            loss: LossKind::Mse,
            optimizer: OptimizerConfig::adam(0.01, 5e-4),
            epochs: 500,
            batch_size: None,
            seed: 0,
            thresholds: RegionThresholds::default(),
            snapshot_epochs: default_snapshots(),
            bias_init: BiasInit::MeanTarget,
            dataset: None,
        }
    }

    /// GAT: AdamW (lr 1e-5, weight decay 5e-4), dropout 0.6, log-MSE,
    /// 500 epochs, mini-batches of 32.
    pub fn gat_default() -> Self {
        Self {
            model: ModelConfig::default_for(ModelKind::Gat),
            loss: LossKind::log_mse(),
            optimizer: OptimizerConfig::adamw(1e-5, 5e-4),
            batch_size: Some(32),
            ..Self::gcn_default()
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Gcn => Self::gcn_default(),
            ModelKind::Gat => Self::gat_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != TRAIN_SCHEMA_VERSION {
            return Err(Error::VersionMismatch {
                found: self.schema_version,
                expected: TRAIN_SCHEMA_VERSION,
            });
        }
        self.model.validate()?;
        self.optimizer.validate()?;
        self.thresholds.validate()?;
        if self.batch_size == Some(0) {
            return Err(Error::InvalidParams("batch size must be positive".into()));
        }
        if let LossKind::LogMse { log_floor } = self.loss {
            if !(log_floor > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "log floor must be positive, got {log_floor}"
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Flattened weights of one epoch, for histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    pub epoch: usize,
    pub tensors: Vec<(String, Vec<f64>)>,
}

impl WeightSnapshot {
    /// Weight matrices and attention vectors; biases are left out.
    pub fn capture(epoch: usize, model: &Model) -> Self {
        let tensors = model
            .tensor_names()
            .into_iter()
            .zip(model.tensors())
            .filter(|(name, _)| name != "b")
            .map(|(name, t)| (name, t.to_vec()))
            .collect();
        Self { epoch, tensors }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean training loss of each epoch, `loss_curve[e - 1]` for epoch `e`.
    pub loss_curve: Vec<f64>,
    pub snapshots: Vec<WeightSnapshot>,
}

/// Train from a fresh initialization.
pub fn train(cfg: &TrainConfig, data: &[LabeledGraph]) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut model = Model::init(&cfg.model, cfg.seed)?;
    if cfg.bias_init == BiasInit::MeanTarget && !data.is_empty() {
        let mean = data.iter().map(|d| d.target).sum::<f64>() / data.len() as f64;
        model.set_bias(mean);
    }
    train_from(cfg, model, data)
}

/// Train starting from `model`.
pub fn train_from(cfg: &TrainConfig, mut model: Model, data: &[LabeledGraph]) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if model.kind() != cfg.model.kind() {
        return Err(Error::InvalidParams("model kind differs from the configuration".into()));
    }
    let mut opt = OptimizerState::new(cfg.optimizer, &model)?;
    let batch = cfg.batch_size.unwrap_or(data.len()).min(data.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut snapshots = Vec::new();
    if cfg.snapshot_epochs.contains(&0) {
        snapshots.push(WeightSnapshot::capture(0, &model));
    }
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        if batch < data.len() {
            Rng64::new(Rng64::derive_seed(cfg.seed, &[epoch as u64])).shuffle(&mut order);
        }
        let mut total = 0.0;
        for (k, chunk) in order.chunks(batch).enumerate() {
            let items: Vec<&LabeledGraph> = chunk.iter().map(|&i| &data[i]).collect();
            let mode = Mode::Train {
                seed: Rng64::derive_seed(cfg.seed, &[epoch as u64, k as u64]),
            };
            let (loss, grads) = match model.batch_step(&items, cfg.loss, mode) {
                Ok(r) => r,
                Err(Error::NumericFailure(msg)) => {
                    return Err(Error::NumericFailure(format!(
                        "epoch {epoch}, batch {k}: {msg}"
                    )))
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::NumericFailure(format!(
                    "epoch {epoch}, batch {k}: loss {loss}, finite gradient: {}",
                    grads.is_finite()
                )));
            }
            opt.step(&mut model, &grads)?;
            total += loss * chunk.len() as f64;
        }
        if !model.is_finite() {
            return Err(Error::NumericFailure(format!(
                "epoch {epoch}: parameters became non-finite"
            )));
        }
        loss_curve.push(total / data.len() as f64);
        if cfg.snapshot_epochs.contains(&epoch) && epoch != cfg.epochs {
            snapshots.push(WeightSnapshot::capture(epoch, &model));
        }
    }
    if cfg.epochs > 0 {
        snapshots.push(WeightSnapshot::capture(cfg.epochs, &model));
    }
    Ok(TrainOutcome {
        model,
        loss_curve,
        snapshots,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub n: usize,
    pub family: String,
    pub y: f64,
    pub yhat: f64,
    pub true_region: RegionLabel,
    pub pred_region: RegionLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<PredictionRow>,
    /// `confusion[true][pred]` counts, regions in code order.
    pub confusion: [[usize; 3]; 3],
    pub mse: f64,
    pub accuracy: f64,
    /// Pearson correlation of `ŷ` and `y`; NaN when either is constant.
    pub pearson: f64,
    pub thresholds: RegionThresholds,
    pub runtime_secs: f64,
}

impl EvalReport {
    pub fn from_rows(rows: Vec<PredictionRow>, thresholds: RegionThresholds, runtime_secs: f64) -> Self {
        let mut confusion = [[0usize; 3]; 3];
        for r in &rows {
            confusion[r.true_region.index()][r.pred_region.index()] += 1;
        }
        let n = rows.len() as f64;
        let mse = rows.iter().map(|r| (r.yhat - r.y).powi(2)).sum::<f64>() / n;
        let correct = rows.iter().filter(|r| r.true_region == r.pred_region).count();
        let y: Vec<f64> = rows.iter().map(|r| r.y).collect();
        let yhat: Vec<f64> = rows.iter().map(|r| r.yhat).collect();
        Self {
            confusion,
            mse,
            accuracy: correct as f64 / n,
            pearson: pearson(&yhat, &y),
            rows,
            thresholds,
            runtime_secs,
        }
    }

    /// Row-normalized confusion matrix in percent; empty rows stay zero.
    pub fn confusion_percent(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (t, row) in self.confusion.iter().enumerate() {
            let total: usize = row.iter().sum();
            if total > 0 {
                for (p, &c) in row.iter().enumerate() {
                    out[t][p] = 100.0 * c as f64 / total as f64;
                }
            }
        }
        out
    }

    /// Accuracy over rows whose true region is in `regions`.
    pub fn accuracy_on(&self, regions: &[RegionLabel]) -> f64 {
        let rows: Vec<&PredictionRow> = self
            .rows
            .iter()
            .filter(|r| regions.contains(&r.true_region))
            .collect();
        if rows.is_empty() {
            return f64::NAN;
        }
        rows.iter().filter(|r| r.true_region == r.pred_region).count() as f64 / rows.len() as f64
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Predict every graph and compare regions.
pub fn evaluate(model: &Model, data: &[LabeledGraph], th: &RegionThresholds) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::InvalidInput("evaluation set is empty".into()));
    }
    let start = Instant::now();
    let preds: Vec<f64> = data
        .par_iter()
        .map(|d| model.predict(d))
        .collect::<Result<_>>()?;
    Ok(evaluate_predictions(data, &preds, th, start.elapsed().as_secs_f64()))
}

/// Build a report from precomputed predictions.
pub fn evaluate_predictions(
    data: &[LabeledGraph],
    preds: &[f64],
    th: &RegionThresholds,
    runtime_secs: f64,
) -> EvalReport {
    let rows = data
        .iter()
        .zip(preds)
        .map(|(d, &yhat)| PredictionRow {
            id: d.id.clone(),
            n: d.n(),
            family: d.source.clone(),
            y: d.target,
            yhat,
            true_region: classify_region(d.target, th),
            pred_region: classify_region(yhat, th),
        })
        .collect();
    EvalReport::from_rows(rows, *th, runtime_secs)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Summary<'a> {
    count: usize,
    mse: f64,
    region_accuracy: f64,
    pearson: Option<f64>,
    confusion_counts: [[usize; 3]; 3],
    confusion_percent: [[f64; 3]; 3],
    thresholds: &'a RegionThresholds,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

/// Write `predictions.csv`, `confusion.csv` and `summary.json` to `dir`.
/// Runtime is left out so reports are byte-reproducible.
pub fn write_eval_report(report: &EvalReport, dir: impl AsRef<Path>, note: Option<&str>) -> Result<()> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let mut csv = String::from("id,n,family,y,yhat,true_region,pred_region\n");
    for r in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.id,
            r.n,
            r.family,
            r.y,
            r.yhat,
            r.true_region.code(),
            r.pred_region.code()
        );
    }
    write(&dir.join("predictions.csv"), &csv)?;

    let pct = report.confusion_percent();
    let mut conf = String::from("true_region,pred_1,pred_2,pred_3\n");
    for (t, row) in pct.iter().enumerate() {
        let _ = writeln!(conf, "{},{},{},{}", t + 1, row[0], row[1], row[2]);
    }
    write(&dir.join("confusion.csv"), &conf)?;

    let summary = Summary {
        count: report.rows.len(),
        mse: report.mse,
        region_accuracy: report.accuracy,
        pearson: report.pearson.is_finite().then_some(report.pearson),
        confusion_counts: report.confusion,
        confusion_percent: pct,
        thresholds: &report.thresholds,
        note,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write(&dir.join("summary.json"), &json)
}

/// Read `predictions.csv` back into rows.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.is_empty())
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(parse_err(k + 1, format!("expected 7 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(k + 1, format!("{s:?}: {e}")));
            let region = |s: &str| {
                s.parse::<u8>()
                    .ok()
                    .and_then(RegionLabel::from_code)
                    .ok_or_else(|| parse_err(k + 1, format!("bad region {s:?}")))
            };
            Ok(PredictionRow {
                id: f[0].to_string(),
                n: f[1].parse().map_err(|e| parse_err(k + 1, format!("{e}")))?,
                family: f[2].to_string(),
                y: num(f[3])?,
                yhat: num(f[4])?,
                true_region: region(f[5])?,
                pred_region: region(f[6])?,
            })
        })
        .collect()
}

pub const HISTOGRAM_BINS: usize = 40;

/// Equal-width histogram over `[min, max]`; returns `(lo, hi, count)` per
/// bin. Counts sum to `values.len()`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (lo + k as f64 * width, lo + (k + 1) as f64 * width, c))
        .collect()
}

/// Write `loss.csv` and one `histograms/epoch_<e>.csv` per snapshot.
pub fn write_training_report(outcome: &TrainOutcome, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in outcome.loss_curve.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", e + 1, l);
    }
    write(&dir.join("loss.csv"), &csv)?;
    let hist_dir = dir.join("histograms");
    ensure_dir(&hist_dir)?;
    for snap in &outcome.snapshots {
        let mut out = String::from("tensor,bin_lo,bin_hi,count\n");
        for (name, values) in &snap.tensors {
            for (lo, hi, c) in histogram(values, HISTOGRAM_BINS) {
                let _ = writeln!(out, "{name},{lo},{hi},{c}");
            }
        }
        write(&hist_dir.join(format!("epoch_{}.csv", snap.epoch)), &out)?;
    }
    Ok(())
}
