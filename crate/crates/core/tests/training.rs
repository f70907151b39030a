use std::path::Path;

use mamaf_core::data::*;
use mamaf_core::training::*;
use mamaf_core::{Error, ModelConfig, ModelWeights, Tensor};

fn small_model() -> ModelConfig {
    ModelConfig {
        input_hw: 16,
        ..ModelConfig::default()
    }
}

fn small_train(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        augmentation: false,
        ..TrainConfig::desk()
    }
}

fn synth(dir: &Path, n: usize) -> Manifest {
    let cfg = SynthConfig {
        n_pos: n,
        n_neg: n,
        frames: 25,
        hw: 16,
        seed: 3,
    };
    generate_synthetic_cohort(dir, &cfg).unwrap()
}

fn splits(dir: &Path, m: &Manifest, model: &ModelConfig) -> (Vec<LoadedSample>, Vec<LoadedSample>) {
    let cohort = load_cohort(dir, m, model).unwrap();
    let mut all: Vec<LoadedSample> = cohort.into_values().collect();
    let val = all.split_off(all.len() - 2);
    (all, val)
}

#[test]
fn single_epoch_returns_its_weights() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth(dir.path(), 3);
    let model = small_model();
    let (train, val) = splits(dir.path(), &m, &model);
    let (w, log) = train_fold(&model, &train, &val, &small_train(1), 0, &mut |_| {}).unwrap();
    assert_eq!(log.train_loss.len(), 1);
    assert_eq!(log.best_epoch, 0);
    assert_eq!(mean_loss(&w, &val).unwrap(), log.val_loss[0]);
    assert_ne!(w, ModelWeights::init(&model).unwrap());
}

#[test]
fn zero_learning_rate_freezes_weights() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth(dir.path(), 3);
    let model = small_model();
    let (train, val) = splits(dir.path(), &m, &model);
    let cfg = TrainConfig { lr: 0.0, ..small_train(3) };
    let (w, log) = train_fold(&model, &train, &val, &cfg, 0, &mut |_| {}).unwrap();
    assert_eq!(w, ModelWeights::init(&model).unwrap());
    assert!(log.val_loss.iter().all(|&v| v == log.val_loss[0]));
    assert_eq!(log.best_epoch, 0);
}

#[test]
fn best_epoch_is_earliest_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth(dir.path(), 3);
    let model = small_model();
    let (train, val) = splits(dir.path(), &m, &model);
    let mut events = Vec::new();
    let (w, log) = train_fold(&model, &train, &val, &small_train(4), 1, &mut |e| events.push(*e)).unwrap();
    let min = log.val_loss.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(log.best_epoch, log.val_loss.iter().position(|&v| v == min).unwrap());
    assert_eq!(mean_loss(&w, &val).unwrap(), min);
    assert_eq!(events.len(), 4);
    assert_eq!(events.iter().filter(|e| e.improved).count() >= 1, true);
    let csv = log.to_csv();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn non_finite_loss_names_epoch_and_batch() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth(dir.path(), 3);
    let model = small_model();
    let (mut train, val) = splits(dir.path(), &m, &model);
    for s in &mut train {
        s.views[0] = Tensor::full(s.views[0].shape(), f32::NAN).unwrap();
    }
    let err = train_fold(&model, &train, &val, &small_train(2), 0, &mut |_| {}).unwrap_err();
    assert!(matches!(err, Error::Diverged { epoch: 1, batch: 1, .. }), "{err}");
    assert!(err.is_numerical());
}

#[test]
fn augmentation_stays_in_training() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth(dir.path(), 5);
    let model = small_model();
    let cohort = load_cohort(dir.path(), &m, &model).unwrap();
    let cfg = TrainConfig {
        augmentation: true,
        augment_target: 8,
        ..small_train(1)
    };
    let plan = plan_folds(&m, 5, 0.2, cfg.seed).unwrap();
    for fold in &plan.folds {
        let p = prepare_fold(&cohort, fold, &cfg).unwrap();
        assert!(p.validation.iter().chain(&p.test).all(|s| !s.is_augmented()));
        for label in Label::ALL {
            assert_eq!(p.train.iter().filter(|s| s.label == label).count(), 8);
        }
        let mut leaky = p.clone();
        let mut copy = leaky.test[0].clone();
        copy.subject_id = format!("{}#aug0", copy.subject_id);
        leaky.train.push(copy);
        assert!(check_leakage(&leaky).is_err());
    }
}

#[test]
fn cross_validation_is_reproducible() {
    let data = tempfile::tempdir().unwrap();
    let m = synth(data.path(), 5);
    let model = small_model();
    let cfg = small_train(2);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_cross_validation(data.path(), &m, &model, &cfg, Some(a.path()), &mut |_| {}).unwrap();
    let rb = run_cross_validation(data.path(), &m, &model, &cfg, Some(b.path()), &mut |_| {}).unwrap();
    assert_eq!(ra.cumulative, rb.cumulative);
    assert_eq!(ra.cumulative.total(), 10);
    for f in ["metrics.json", "cv_summary.json", "roc.csv", "folds.json", "fold-0/metrics.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    for f in ["roc.svg", "loss.svg", "fold-4/checkpoint.mamf", "fold-4/loss.csv"] {
        assert!(a.path().join(f).exists(), "{f}");
    }
    let mut tested: Vec<String> = ra.folds.iter().flat_map(|f| f.predictions.iter().map(|p| p.subject_id.clone())).collect();
    tested.sort();
    let mut all: Vec<String> = m.samples.iter().map(|s| s.subject_id.clone()).collect();
    all.sort();
    assert_eq!(tested, all);
}
