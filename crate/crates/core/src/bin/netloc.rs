//! `netloc` command-line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use netloc::data::{self, DatasetSpec};
use netloc::error::{Error, Result};
use netloc::features::{build_feature_matrix, features_to_csv};
use netloc::gradcheck::{gradcheck, GradcheckOptions};
use netloc::graph::Graph;
use netloc::model::{Checkpoint, ModelKind};
use netloc::spectral::{classify_region, ipr, power_iteration, RegionThresholds, SpectralConfig};
use netloc::train::{self, TrainConfig};

#[derive(Parser)]
#[command(name = "netloc", version, about = "Network localization: spectral labels and GNN regressors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    CycleStar,
    FourFamily,
    ErSf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gcn,
    Gat,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Gcn => ModelKind::Gcn,
            ModelArg::Gat => ModelKind::Gat,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a synthetic train/test dataset.
    Generate {
        /// Dataset spec (JSON). Overrides --preset and --scale.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "cycle-star")]
        preset: Preset,
        #[arg(long, value_enum, default_value = "desk")]
        scale: Scale,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leading eigenvalue, IPR and region of an edge-list graph.
    Spectral {
        edgelist: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
        /// Also print the steady-state (principal eigenvector) entries.
        #[arg(long)]
        vector: bool,
    },
    /// Node-feature matrix of an edge-list graph as CSV.
    Features {
        edgelist: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a TU-format directory into a labeled dataset.
    IngestTu {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fraction placed in `<out>/train`; the rest goes to `<out>/test`.
        #[arg(long, default_value_t = 0.8)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model and write a checkpoint plus training curves.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model preset used when no config file is given.
        #[arg(long, value_enum, default_value = "gcn")]
        model: ModelArg,
        /// Training dataset directory (overrides the config).
        #[arg(long)]
        train: Option<PathBuf>,
        /// Test dataset directory, evaluated after training.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Training config whose thresholds are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long, value_enum, default_value = "gcn")]
        model: ModelArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Check the GAT with dropout active.
        #[arg(long)]
        train_mode: bool,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
    },
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn generate(config: Option<PathBuf>, preset: Preset, scale: Scale, seed: Option<u64>, out: PathBuf) -> Result<()> {
    let mut spec = match config {
        Some(path) => {
            let text = fs::read_to_string(&path).map_err(|e| Error::Io { path, source: e })?;
            serde_json::from_str::<DatasetSpec>(&text)?
        }
        None => {
            let base = match preset {
                Preset::CycleStar => DatasetSpec::cycle_star_desk(0),
                Preset::FourFamily => DatasetSpec::four_family_desk(0),
                Preset::ErSf => DatasetSpec::er_sf_desk(0),
            };
            match scale {
                Scale::Desk => base,
                Scale::Paper => base.paper_scale(),
            }
        }
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (train_set, test_set) = data::build_synthetic(&spec)?;
    data::save_dataset(out.join("train"), &train_set, Some(&spec))?;
    data::save_dataset(out.join("test"), &test_set, Some(&spec))?;
    print_json(&json!({
        "train": train_set.len(),
        "test": test_set.len(),
        "out": out,
    }))
}

fn spectral(edgelist: PathBuf, tol: f64, max_iter: usize, vector: bool) -> Result<()> {
    let g = Graph::read_edge_list(&edgelist)?;
    let r = power_iteration(&g, tol, max_iter)?;
    let y = ipr(&r.pev)?;
    let region = classify_region(y, &RegionThresholds::default());
    let mut out = json!({
        "n": g.n(),
        "m": g.edge_count(),
        "lambda1": r.lambda1,
        "ipr": y,
        "region": region.code(),
        "region_name": region.name(),
        "iterations": r.iterations,
        "residual": r.residual,
    });
    if vector {
        out["steady_state"] = json!(r.pev);
    }
    print_json(&out)
}

fn features(edgelist: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let g = Graph::read_edge_list(&edgelist)?;
    let csv = features_to_csv(&build_feature_matrix(&g)?);
    match out {
        Some(path) => fs::write(&path, csv).map_err(|e| Error::Io { path, source: e }),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn ingest(dir: PathBuf, out: PathBuf, fraction: f64, seed: u64) -> Result<()> {
    let raw = data::ingest_tu_dataset(&dir)?;
    let raw_count = raw.len();
    let kept = data::preprocess(raw, &SpectralConfig::default())?;
    let kept_count = kept.len();
    let (train_set, test_set) = data::split(kept, fraction, seed)?;
    data::save_dataset(out.join("train"), &train_set, None)?;
    data::save_dataset(out.join("test"), &test_set, None)?;
    print_json(&json!({
        "raw": raw_count,
        "kept": kept_count,
        "train": train_set.len(),
        "test": test_set.len(),
    }))
}

#[allow(clippy::too_many_arguments)]
fn train_cmd(
    config: Option<PathBuf>,
    model: ModelArg,
    train_dir: Option<PathBuf>,
    test_dir: Option<PathBuf>,
    epochs: Option<usize>,
    seed: Option<u64>,
    out: PathBuf,
) -> Result<()> {
    let mut cfg = match config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default_for(model.into()),
    };
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = train_dir {
        cfg.dataset = Some(train::DatasetPaths {
            train: t,
            test: test_dir.clone(),
        });
    } else if let (Some(t), Some(paths)) = (test_dir, cfg.dataset.as_mut()) {
        paths.test = Some(t);
    }
    cfg.validate()?;
    let paths = cfg
        .dataset
        .clone()
        .ok_or_else(|| Error::InvalidInput("no training dataset given (--train or config)".into()))?;
    let train_set = data::load_dataset(&paths.train)?;
    let outcome = train::train(&cfg, &train_set)?;
    fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    Checkpoint::from_model(&outcome.model).save(out.join("checkpoint.json"))?;
    write_json(&out.join("train_config.json"), &cfg)?;
    train::write_training_report(&outcome, &out)?;
    let train_report = train::evaluate(&outcome.model, &train_set, &cfg.thresholds)?;
    train::write_eval_report(&train_report, out.join("eval_train"), None)?;
    let mut summary = json!({
        "epochs": cfg.epochs,
        "final_loss": outcome.loss_curve.last(),
        "train_accuracy": train_report.accuracy,
        "train_mse": train_report.mse,
    });
    if let Some(test) = &paths.test {
        let test_set = data::load_dataset(test)?;
        let report = train::evaluate(&outcome.model, &test_set, &cfg.thresholds)?;
        train::write_eval_report(&report, out.join("eval_test"), None)?;
        summary["test_accuracy"] = json!(report.accuracy);
        summary["test_mse"] = json!(report.mse);
        summary["test_pearson"] = json!(report.pearson.is_finite().then_some(report.pearson));
    }
    print_json(&summary)
}

fn eval_cmd(checkpoint: PathBuf, data_dir: PathBuf, config: Option<PathBuf>, out: PathBuf) -> Result<()> {
    let model = Checkpoint::load(&checkpoint)?.to_model()?;
    let thresholds = match config {
        Some(path) => TrainConfig::load(path)?.thresholds,
        None => RegionThresholds::default(),
    };
    let set = data::load_dataset(&data_dir)?;
    let report = train::evaluate(&model, &set, &thresholds)?;
    train::write_eval_report(&report, &out, None)?;
    print_json(&json!({
        "count": report.rows.len(),
        "accuracy": report.accuracy,
        "mse": report.mse,
        "pearson": report.pearson.is_finite().then_some(report.pearson),
        "runtime_secs": report.runtime_secs,
    }))
}

fn gradcheck_cmd(model: ModelArg, seed: u64, train_mode: bool, step: f64) -> Result<bool> {
    let mut opts = GradcheckOptions::new(model.into());
    opts.train_mode = train_mode;
    opts.step = step;
    let report = gradcheck(&opts, seed)?;
    print_json(&serde_json::to_value(&report)?)?;
    Ok(report.max_rel_error < 1e-4)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate {
            config,
            preset,
            scale,
            seed,
            out,
        } => generate(config, preset, scale, seed, out).map(|_| true),
        Command::Spectral {
            edgelist,
            tol,
            max_iter,
            vector,
        } => spectral(edgelist, tol, max_iter, vector).map(|_| true),
        Command::Features { edgelist, out } => features(edgelist, out).map(|_| true),
        Command::IngestTu {
            dir,
            out,
            fraction,
            seed,
        } => ingest(dir, out, fraction, seed).map(|_| true),
        Command::Train {
            config,
            model,
            train,
            test,
            epochs,
            seed,
            out,
        } => train_cmd(config, model, train, test, epochs, seed, out).map(|_| true),
        Command::Eval {
            checkpoint,
            data,
            config,
            out,
        } => eval_cmd(checkpoint, data, config, out).map(|_| true),
        Command::Gradcheck {
            model,
            seed,
            train_mode,
            step,
        } => gradcheck_cmd(model, seed, train_mode, step),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
