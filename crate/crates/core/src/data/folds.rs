//! Stratified, subject-wise k-fold planning.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::manifest::{Label, Manifest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Test folds: each class is shuffled (seeded), then dealt round-robin,
/// negatives continuing where positives stopped so fold sizes differ by
/// at most one. Within a fold the remaining subjects are split per class
/// into train and validation.
pub fn plan_folds(manifest: &Manifest, k: usize, val_fraction: f64, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::Config(format!("validation fraction must be in [0, 1), got {val_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test: Vec<Vec<(String, Label)>> = vec![Vec::new(); k];
    let mut next = 0;
    for label in [Label::Positive, Label::Negative] {
        let mut ids: Vec<String> = manifest
            .samples
            .iter()
            .filter(|s| s.label == label)
            .map(|s| s.subject_id.clone())
            .collect();
        if ids.len() < k {
            return Err(Error::Data(format!(
                "{} {label} subjects cannot fill {k} folds",
                ids.len()
            )));
        }
        ids.shuffle(&mut rng);
        for id in ids {
            test[next % k].push((id, label));
            next += 1;
        }
    }

    let mut folds = Vec::with_capacity(k);
    for (index, held_out) in test.iter().enumerate() {
        let held: HashSet<&str> = held_out.iter().map(|(id, _)| id.as_str()).collect();
        let mut fold_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1 + index as u64));
        let (mut train, mut validation) = (Vec::new(), Vec::new());
        for label in [Label::Positive, Label::Negative] {
            let mut rest: Vec<String> = manifest
                .samples
                .iter()
                .filter(|s| s.label == label && !held.contains(s.subject_id.as_str()))
                .map(|s| s.subject_id.clone())
                .collect();
            rest.shuffle(&mut fold_rng);
            let n_val = ((rest.len() as f64 * val_fraction).round() as usize).min(rest.len().saturating_sub(1));
            let tail = rest.split_off(n_val);
            validation.extend(rest);
            train.extend(tail);
        }
        folds.push(Fold {
            index,
            train,
            validation,
            test: held_out.iter().map(|(id, _)| id.clone()).collect(),
        });
    }
    Ok(FoldPlan { k, seed, folds })
}

impl FoldPlan {
    /// Re-checks the partition and disjointness contract against a manifest.
    pub fn verify(&self, manifest: &Manifest) -> Result<()> {
        let all: HashSet<&str> = manifest.samples.iter().map(|s| s.subject_id.as_str()).collect();
        let mut tested = HashSet::new();
        for f in &self.folds {
            let mut roles = HashSet::new();
            for id in f.train.iter().chain(&f.validation).chain(&f.test) {
                if !all.contains(id.as_str()) {
                    return Err(Error::Data(format!("fold {}: unknown subject {id:?}", f.index)));
                }
                if !roles.insert(id.as_str()) {
                    return Err(Error::Data(format!("fold {}: subject {id:?} has two roles", f.index)));
                }
            }
            for id in &f.test {
                if !tested.insert(id.as_str()) {
                    return Err(Error::Data(format!("subject {id:?} is tested in two folds")));
                }
            }
        }
        if tested.len() != all.len() {
            return Err(Error::Data(format!(
                "test folds cover {} of {} subjects",
                tested.len(),
                all.len()
            )));
        }
        Ok(())
    }
}
