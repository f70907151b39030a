use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Balance each training split up to `augment_target` per class.
    pub augmentation: bool,
    pub augment_target: usize,
    pub folds: usize,
    pub val_fraction: f64,
    /// Where fold checkpoints go; `None` keeps them in memory only.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    /// The full protocol: 300 epochs at 1e-5 with augmentation to 100 per
    /// class.
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 1e-5,
            batch_size: 2,
            seed: 7,
            augmentation: true,
            augment_target: 100,
            folds: 5,
            val_fraction: 0.2,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    /// Desk-scale profile for the synthetic cohort.
    pub fn desk() -> Self {
        Self {
            epochs: 60,
            lr: 2e-4,
            augmentation: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!("val_fraction must be in (0, 1), got {}", self.val_fraction)));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}
