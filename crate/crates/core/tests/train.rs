use std::fs;

use netloc::data::{build_synthetic, DatasetSpec, LabeledGraph, SplitSpec};
use netloc::graph::{make_cycle, GraphFamily};
use netloc::model::{Checkpoint, Model, ModelKind};
use netloc::spectral::{RegionLabel, RegionThresholds, SpectralConfig};
use netloc::train::*;

fn toy_set(seed: u64) -> Vec<LabeledGraph> {
    let spec = DatasetSpec {
        families: vec![GraphFamily::Cycle, GraphFamily::Star],
        train: SplitSpec {
            n_min: 20,
            n_max: 30,
            count: 20,
        },
        test: SplitSpec {
            n_min: 20,
            n_max: 30,
            count: 2,
        },
        seed,
        thresholds: RegionThresholds::default(),
        spectral: SpectralConfig::default(),
    };
    build_synthetic(&spec).unwrap().0
}

fn gcn_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        ..TrainConfig::gcn_default()
    }
}

#[test]
fn toy_set_is_fit_closely() {
    let data = toy_set(1);
    let cfg = gcn_config(200);
    let out = train(&cfg, &data).unwrap();
    let report = evaluate(&out.model, &data, &cfg.thresholds).unwrap();
    assert!(report.mse < 1e-4, "train MSE {}", report.mse);
    assert!(out.loss_curve.iter().all(|l| l.is_finite()));
    assert_eq!(out.loss_curve.len(), 200);
}

#[test]
fn identical_configs_give_identical_curves() {
    let data = toy_set(2);
    for cfg in [gcn_config(15), TrainConfig { epochs: 3, batch_size: Some(8), ..TrainConfig::gat_default() }] {
        let a = train(&cfg, &data).unwrap();
        let b = train(&cfg, &data).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.loss_curve), bits(&b.loss_curve));
        assert_eq!(a.model, b.model);
    }
}

#[test]
fn zero_epochs_return_initial_parameters() {
    let data = toy_set(3);
    let cfg = gcn_config(0);
    let init = Model::init(&cfg.model, cfg.seed).unwrap();
    let out = train_from(&cfg, init.clone(), &data).unwrap();
    assert_eq!(out.model, init);
    assert!(out.loss_curve.is_empty());
}

#[test]
fn mean_target_bias_initialization() {
    let data = toy_set(4);
    let cfg = gcn_config(0);
    let out = train(&cfg, &data).unwrap();
    let mean = data.iter().map(|d| d.target).sum::<f64>() / data.len() as f64;
    assert_eq!(out.model.bias(), mean);
}

#[test]
fn snapshots_cover_requested_epochs_and_final() {
    let data = toy_set(5);
    let out = train(&gcn_config(7), &data).unwrap();
    let epochs: Vec<usize> = out.snapshots.iter().map(|s| s.epoch).collect();
    assert_eq!(epochs, vec![0, 1, 2, 3, 4, 7]);
}

#[test]
fn nan_loss_aborts_training() {
    let mut data = toy_set(6);
    data[0].features.data_mut()[0] = f64::NAN;
    let err = train(&gcn_config(3), &data).unwrap_err();
    assert!(matches!(err, netloc::Error::NumericFailure(_)), "{err:?}");
}

#[test]
fn perfect_and_constant_predictors() {
    let th = RegionThresholds::default();
    let data = toy_set(7);
    let truth: Vec<f64> = data.iter().map(|d| d.target).collect();
    let perfect = evaluate_predictions(&data, &truth, &th, 0.0);
    assert_eq!(perfect.accuracy, 1.0);
    let pct = perfect.confusion_percent();
    for (t, row) in pct.iter().enumerate() {
        for (p, &v) in row.iter().enumerate() {
            if t != p {
                assert_eq!(v, 0.0);
            }
        }
    }
    let cycles: Vec<LabeledGraph> = (20..30)
        .map(|n| LabeledGraph::label(format!("c{n}"), make_cycle(n).unwrap(), "cycle", 0, &SpectralConfig::default()).unwrap())
        .collect();
    let constant = evaluate_predictions(&cycles, &vec![0.5; cycles.len()], &th, 0.0);
    assert_eq!(constant.accuracy, 0.0);
    assert!(constant.rows.iter().all(|r| r.pred_region == RegionLabel::StronglyLocalized));
}

#[test]
fn report_round_trip_reproduces_accuracy() {
    let data = toy_set(8);
    let cfg = gcn_config(20);
    let out = train(&cfg, &data).unwrap();
    let report = evaluate(&out.model, &data, &cfg.thresholds).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report_dir = dir.path().join("nested").join("eval");
    write_eval_report(&report, &report_dir, Some("toy")).unwrap();
    let rows = read_predictions(report_dir.join("predictions.csv")).unwrap();
    assert_eq!(rows, report.rows);
    let rebuilt = EvalReport::from_rows(rows, cfg.thresholds, 0.0);
    assert_eq!(rebuilt.accuracy, report.accuracy);
    assert_eq!(rebuilt.confusion, report.confusion);
    let conf = fs::read_to_string(report_dir.join("confusion.csv")).unwrap();
    for line in conf.lines().skip(1) {
        let vals: Vec<f64> = line.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        let sum: f64 = vals.iter().sum();
        assert!(sum == 0.0 || (sum - 100.0).abs() < 1e-9, "{line}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(report_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["region_accuracy"].as_f64().unwrap(), report.accuracy);
    assert!(summary.get("runtime_secs").is_none());
}

#[test]
fn histograms_conserve_parameter_counts() {
    let data = toy_set(9);
    let out = train(&gcn_config(2), &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_training_report(&out, dir.path()).unwrap();
    let shapes = out.model.tensor_shapes();
    let names = netloc::optim::ParamSet::tensor_names(&out.model);
    for snap in &out.snapshots {
        let text = fs::read_to_string(dir.path().join(format!("histograms/epoch_{}.csv", snap.epoch))).unwrap();
        for (name, (r, c)) in names.iter().zip(&shapes) {
            if name == "b" {
                continue;
            }
            let total: usize = text
                .lines()
                .skip(1)
                .filter(|l| l.split(',').next() == Some(name))
                .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
                .sum();
            assert_eq!(total, r * c, "{name}");
        }
    }
    let loss = fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 3);
}

#[test]
fn checkpoints_round_trip_exactly() {
    let data = toy_set(10);
    for kind in [ModelKind::Gcn, ModelKind::Gat] {
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default_for(kind)
        };
        let out = train(&cfg, &data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.json");
        Checkpoint::from_model(&out.model).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap().to_model().unwrap();
        assert_eq!(back, out.model);
        for d in &data {
            assert_eq!(back.predict(d).unwrap().to_bits(), out.model.predict(d).unwrap().to_bits());
        }
    }
}

#[test]
fn tampered_checkpoint_version_is_rejected() {
    let model = Model::init(&netloc::model::ModelConfig::default_for(ModelKind::Gcn), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkpoint.json");
    Checkpoint::from_model(&model).save(&path).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    value["version"] = serde_json::json!(2);
    fs::write(&path, value.to_string()).unwrap();
    assert!(matches!(
        Checkpoint::load(&path),
        Err(netloc::Error::VersionMismatch { found: 2, expected: 1 })
    ));
}

#[test]
fn config_files_load_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.json");
    let cfg = TrainConfig::gat_default();
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    assert_eq!(TrainConfig::load(&path).unwrap(), cfg);
    let mut bad = serde_json::to_value(&cfg).unwrap();
    bad["schema_version"] = serde_json::json!(99);
    fs::write(&path, bad.to_string()).unwrap();
    assert!(TrainConfig::load(&path).is_err());
    let bad = TrainConfig {
        batch_size: Some(0),
        ..cfg
    };
    assert!(bad.validate().is_err());
}

#[test]
fn pearson_reference_values() {
    assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
    assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
    assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_nan());
}
