use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tape};
use crate::data::LoadedSample;
use crate::error::{Error, Result};
use crate::eval::ScoredPrediction;
use crate::model::{bind, forward_batch, ModelConfig, ModelWeights, NUM_CLASSES};
use crate::nn::{cross_entropy, one_hot, AdamState};
use crate::tensor::Tensor;

use super::TrainConfig;

/// Per-epoch losses of one training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Zero-based epoch whose weights were kept.
    pub best_epoch: usize,
    #[serde(skip)]
    pub epoch_seconds: Vec<f64>,
}

impl TrainLog {
    /// `epoch,train_loss,val_loss` with one-based epochs.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for (e, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            s.push_str(&format!("{},{t},{v}\n", e + 1));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochEvent {
    pub fold: Option<usize>,
    pub epoch: usize,
    pub epochs: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub improved: bool,
    pub seconds: f64,
}

fn targets(batch: &[&LoadedSample]) -> Result<Tensor> {
    let labels: Vec<usize> = batch.iter().map(|s| s.label.index()).collect();
    one_hot(&labels, NUM_CLASSES)
}

/// Mean cross-entropy over `samples`, one subject at a time.
pub fn mean_loss(weights: &ModelWeights, samples: &[LoadedSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Data("cannot compute a loss over zero samples".into()));
    }
    let mut total = 0.0;
    for s in samples {
        let pred = weights.predict_batch(std::slice::from_ref(&s.views))?;
        total += f64::from(cross_entropy(&pred, &targets(&[s])?)?);
    }
    Ok(total / samples.len() as f64)
}

/// Positive-class probabilities for `samples`.
pub fn evaluate(weights: &ModelWeights, samples: &[LoadedSample]) -> Result<Vec<ScoredPrediction>> {
    samples
        .iter()
        .map(|s| {
            let p = weights.predict(&s.views)?;
            Ok(ScoredPrediction {
                subject_id: s.subject_id.clone(),
                score: f64::from(p.data()[1]),
                label: s.label,
            })
        })
        .collect()
}

/// One optimizer step on a minibatch; returns the batch loss.
fn train_step(weights: &mut ModelWeights, adam: &mut AdamState, batch: &[&LoadedSample]) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = bind(&mut tape, &weights.params);
    let views: Vec<Vec<Tensor>> = batch.iter().map(|s| s.views.clone()).collect();
    let pred = forward_batch(&mut tape, &weights.config, &bound, &views)?;
    let loss = tape.cross_entropy(&pred, &targets(batch)?)?;
    let value = f64::from(tape.value(&loss).item()?);
    if !value.is_finite() {
        return Ok(value);
    }
    let grads = tape.backward(loss)?.param_grads();
    adam.step(&mut weights.params, &grads)?;
    Ok(value)
}

/// Trains from fresh weights and returns the weights of the epoch with the
/// lowest validation loss (earliest on ties).
pub fn train_fold(
    model: &ModelConfig,
    train: &[LoadedSample],
    val: &[LoadedSample],
    cfg: &TrainConfig,
    seed: u64,
    on_epoch: &mut dyn FnMut(&EpochEvent),
) -> Result<(ModelWeights, TrainLog)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Data(format!(
            "training needs samples in both splits, got {} train and {} validation",
            train.len(),
            val.len()
        )));
    }
    let mut weights = ModelWeights::init(model)?;
    let mut adam = AdamState::new(cfg.adam(), &weights.params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainLog::default();
    let mut best: Option<(f64, ModelWeights)> = None;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&LoadedSample> = chunk.iter().map(|&i| &train[i]).collect();
            let loss = train_step(&mut weights, &mut adam, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    batch: b + 1,
                    loss,
                });
            }
            sum += loss * batch.len() as f64;
        }
        let train_loss = sum / train.len() as f64;
        let val_loss = mean_loss(&weights, val)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFinite(format!("validation loss at epoch {}", epoch + 1)));
        }
        let improved = best.as_ref().map_or(true, |(b, _)| val_loss < *b);
        if improved {
            best = Some((val_loss, weights.clone()));
            log.best_epoch = epoch;
        }
        let seconds = started.elapsed().as_secs_f64();
        log.train_loss.push(train_loss);
        log.val_loss.push(val_loss);
        log.epoch_seconds.push(seconds);
        on_epoch(&EpochEvent {
            fold: None,
            epoch: epoch + 1,
            epochs: cfg.epochs,
            train_loss,
            val_loss,
            improved,
            seconds,
        });
    }
    let (_, best) = best.expect("at least one epoch ran");
    Ok((best, log))
}
