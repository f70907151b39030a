use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{balance_augment, load_views, plan_folds, source_subject, Fold, FoldPlan, LoadedSample, Manifest};
use crate::error::{Error, Result};
use crate::eval::{
    cumulative_confusion, loss_svg, metrics_json, roc_auc, roc_csv, roc_svg, round_to, write_file, ConfusionMatrix,
    LossCurve, MetricsReport, RocCurve, ScoredPrediction,
};
use crate::model::{save_checkpoint, ModelConfig};

use super::{evaluate, train_fold, EpochEvent, TrainConfig, TrainLog};

pub const FOLDS_FILE: &str = "folds.json";

/// Splits of one fold, loaded and (for training) possibly augmented.
#[derive(Debug, Clone)]
pub struct PreparedFold {
    pub train: Vec<LoadedSample>,
    pub validation: Vec<LoadedSample>,
    pub test: Vec<LoadedSample>,
}

/// Loads every subject of the manifest at the model's input size.
pub fn load_cohort(dataset_dir: &Path, manifest: &Manifest, model: &ModelConfig) -> Result<BTreeMap<String, LoadedSample>> {
    manifest
        .samples
        .iter()
        .map(|s| {
            let views = load_views(dataset_dir, s, model.seq_len, model.input_hw)?;
            Ok((
                s.subject_id.clone(),
                LoadedSample {
                    subject_id: s.subject_id.clone(),
                    label: s.label,
                    views,
                    augmentation: None,
                },
            ))
        })
        .collect()
}

fn pick(cohort: &BTreeMap<String, LoadedSample>, ids: &[String]) -> Result<Vec<LoadedSample>> {
    ids.iter()
        .map(|id| {
            cohort
                .get(id)
                .cloned()
                .ok_or_else(|| Error::Data(format!("subject {id:?} is not in the cohort")))
        })
        .collect()
}

/// Gathers a fold's splits; augmentation touches the training split only.
pub fn prepare_fold(cohort: &BTreeMap<String, LoadedSample>, fold: &Fold, cfg: &TrainConfig) -> Result<PreparedFold> {
    let mut train = pick(cohort, &fold.train)?;
    if cfg.augmentation {
        train = balance_augment(&train, cfg.augment_target, cfg.seed.wrapping_add(fold.index as u64))?;
    }
    let prepared = PreparedFold {
        train,
        validation: pick(cohort, &fold.validation)?,
        test: pick(cohort, &fold.test)?,
    };
    check_leakage(&prepared)?;
    Ok(prepared)
}

/// Fails if an augmented sample, or any sample derived from a held-out
/// subject, reaches the wrong split.
pub fn check_leakage(fold: &PreparedFold) -> Result<()> {
    let held_out: HashSet<&str> = fold.validation.iter().chain(&fold.test).map(|s| s.subject_id.as_str()).collect();
    if let Some(s) = fold.validation.iter().chain(&fold.test).find(|s| s.is_augmented()) {
        return Err(Error::Data(format!("augmented sample {:?} in a held-out split", s.subject_id)));
    }
    if let Some(s) = fold.train.iter().find(|s| held_out.contains(source_subject(&s.subject_id))) {
        return Err(Error::Data(format!("training sample {:?} derives from a held-out subject", s.subject_id)));
    }
    if fold.validation.iter().any(|v| fold.test.iter().any(|t| t.subject_id == v.subject_id)) {
        return Err(Error::Data("a subject is in both validation and test".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub index: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    pub predictions: Vec<ScoredPrediction>,
    pub log: TrainLog,
    pub train_size: usize,
    pub augmented: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub plan: FoldPlan,
    pub folds: Vec<FoldResult>,
    pub cumulative: ConfusionMatrix,
    pub pooled_roc: RocCurve,
    /// Cumulative matrix plus pooled AUC.
    pub report: MetricsReport,
}

impl CvResult {
    /// AUC of each fold's own test predictions, where both classes occur.
    pub fn fold_aucs(&self) -> Vec<Option<f64>> {
        self.folds
            .iter()
            .map(|f| roc_auc(&f.predictions).ok().map(|r| r.auc))
            .collect()
    }

    pub fn pooled_predictions(&self) -> Vec<ScoredPrediction> {
        self.folds.iter().flat_map(|f| f.predictions.iter().cloned()).collect()
    }
}

/// Per-fold summary plus both ROC modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub cumulative: MetricsReport,
    pub pooled_auc: f64,
    pub fold_aucs: Vec<Option<f64>>,
    pub mean_fold_auc: Option<f64>,
    pub folds: Vec<FoldSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub index: usize,
    pub metrics: MetricsReport,
    pub best_epoch: usize,
    pub train_size: usize,
    pub augmented: usize,
}

impl CvResult {
    pub fn summary(&self) -> CvSummary {
        let fold_aucs: Vec<Option<f64>> = self.fold_aucs().into_iter().map(|a| a.map(|a| round_to(a, 4))).collect();
        let defined: Vec<f64> = fold_aucs.iter().flatten().copied().collect();
        let mean_fold_auc = (defined.len() == fold_aucs.len() && !defined.is_empty())
            .then(|| round_to(defined.iter().sum::<f64>() / defined.len() as f64, 4));
        CvSummary {
            cumulative: self.report.clone(),
            pooled_auc: round_to(self.pooled_roc.auc, 4),
            fold_aucs,
            mean_fold_auc,
            folds: self
                .folds
                .iter()
                .map(|f| FoldSummary {
                    index: f.index,
                    metrics: f.metrics.clone(),
                    best_epoch: f.log.best_epoch + 1,
                    train_size: f.train_size,
                    augmented: f.augmented,
                })
                .collect(),
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn fold_dir(out: &Path, index: usize) -> std::path::PathBuf {
    out.join(format!("fold-{index}"))
}

/// Stratified k-fold training and evaluation over a manifest. With `out`,
/// writes the plan, per-fold checkpoints, logs and metrics, and the pooled
/// report.
pub fn run_cross_validation(
    dataset_dir: &Path,
    manifest: &Manifest,
    model: &ModelConfig,
    cfg: &TrainConfig,
    out: Option<&Path>,
    on_epoch: &mut dyn FnMut(&EpochEvent),
) -> Result<CvResult> {
    model.validate()?;
    cfg.validate()?;
    let plan = plan_folds(manifest, cfg.folds, cfg.val_fraction, cfg.seed)?;
    plan.verify(manifest)?;
    if let Some(out) = out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write_file(&out.join(FOLDS_FILE), to_json(&plan))?;
    }
    let cohort = load_cohort(dataset_dir, manifest, model)?;

    let mut folds = Vec::with_capacity(plan.folds.len());
    for fold in &plan.folds {
        let wrap = |e: Error| Error::Fold {
            fold: fold.index,
            source: Box::new(e),
        };
        let result = run_fold(&cohort, fold, model, cfg, out, on_epoch).map_err(wrap)?;
        folds.push(result);
    }

    let cumulative = cumulative_confusion(&folds.iter().map(|f| f.confusion).collect::<Vec<_>>())?;
    let pooled: Vec<ScoredPrediction> = folds.iter().flat_map(|f| f.predictions.iter().cloned()).collect();
    let pooled_roc = roc_auc(&pooled)?;
    let report = MetricsReport::new(cumulative, Some(pooled_roc.auc));
    let result = CvResult {
        plan,
        folds,
        cumulative,
        pooled_roc,
        report,
    };
    if let Some(out) = out {
        write_cv_report(out, &result)?;
    }
    Ok(result)
}

fn run_fold(
    cohort: &BTreeMap<String, LoadedSample>,
    fold: &Fold,
    model: &ModelConfig,
    cfg: &TrainConfig,
    out: Option<&Path>,
    on_epoch: &mut dyn FnMut(&EpochEvent),
) -> Result<FoldResult> {
    let prepared = prepare_fold(cohort, fold, cfg)?;
    let seed = cfg.seed.wrapping_add(fold.index as u64);
    let mut tagged = |e: &EpochEvent| on_epoch(&EpochEvent { fold: Some(fold.index), ..*e });
    let (weights, log) = train_fold(model, &prepared.train, &prepared.validation, cfg, seed, &mut tagged)?;
    let predictions = evaluate(&weights, &prepared.test)?;
    let confusion = ConfusionMatrix::from_predictions(&predictions);
    let auc = roc_auc(&predictions).ok().map(|r| r.auc);
    let result = FoldResult {
        index: fold.index,
        confusion,
        metrics: MetricsReport::new(confusion, auc),
        predictions,
        log,
        train_size: prepared.train.len(),
        augmented: prepared.train.iter().filter(|s| s.is_augmented()).count(),
    };

    let ckpt_dir = cfg.checkpoint_dir.clone().or_else(|| out.map(|o| fold_dir(o, fold.index)));
    if let Some(dir) = ckpt_dir {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        save_checkpoint(&weights, checkpoint_path(&dir, cfg, fold.index))?;
    }
    if let Some(out) = out {
        let dir = fold_dir(out, fold.index);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_file(&dir.join("metrics.json"), metrics_json(&result.metrics))?;
        write_file(&dir.join("predictions.json"), to_json(&result.predictions))?;
        write_file(&dir.join("loss.csv"), result.log.to_csv())?;
    }
    Ok(result)
}

/// Checkpoint file of a fold: `fold-{i}.mamf` under an explicit checkpoint
/// dir, `checkpoint.mamf` inside the fold's output dir otherwise.
pub fn checkpoint_path(dir: &Path, cfg: &TrainConfig, fold: usize) -> std::path::PathBuf {
    if cfg.checkpoint_dir.is_some() {
        dir.join(format!("fold-{fold}.mamf"))
    } else {
        dir.join("checkpoint.mamf")
    }
}

fn write_cv_report(out: &Path, r: &CvResult) -> Result<()> {
    write_file(&out.join("metrics.json"), metrics_json(&r.report))?;
    write_file(&out.join("cv_summary.json"), to_json(&r.summary()))?;
    write_file(&out.join("roc.csv"), roc_csv(&r.pooled_roc))?;
    let fold_rocs: Vec<(usize, String, RocCurve)> = r
        .folds
        .iter()
        .filter_map(|f| roc_auc(&f.predictions).ok().map(|c| (f.index, format!("fold {}", f.index), c)))
        .collect();
    for (index, _, c) in &fold_rocs {
        write_file(&fold_dir(out, *index).join("roc.csv"), roc_csv(c))?;
    }
    let mut curves: Vec<(&str, &RocCurve)> = vec![("pooled", &r.pooled_roc)];
    curves.extend(fold_rocs.iter().map(|(_, n, c)| (n.as_str(), c)));
    write_file(&out.join("roc.svg"), roc_svg(&curves))?;
    let names: Vec<String> = r.folds.iter().map(|f| format!("fold {}", f.index)).collect();
    let losses: Vec<LossCurve<'_>> = r
        .folds
        .iter()
        .zip(&names)
        .map(|(f, name)| LossCurve {
            name,
            train: &f.log.train_loss,
            validation: &f.log.val_loss,
        })
        .collect();
    write_file(&out.join("loss.svg"), loss_svg(&losses))
}
