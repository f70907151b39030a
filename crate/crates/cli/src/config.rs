//! The run configuration file and its flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use mamaf_core::training::TrainConfig;
use mamaf_core::ModelConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    /// 25 frames of 32×32, 60 epochs, no augmentation.
    Desk,
    /// 75 frames of 224×224, 300 epochs at 1e-5, augmentation to 100 per class.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "TrainConfig::desk")]
    pub train: TrainConfig,
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn profile(p: Profile) -> Self {
        let (model, train) = match p {
            Profile::Desk => (ModelConfig::default(), TrainConfig::desk()),
            Profile::Full => (ModelConfig::full_resolution(), TrainConfig::default()),
        };
        Self {
            model,
            train,
            data: None,
            out: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| mamaf_core::Error::Config(format!("{}: {e}", path.display())).into())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// Flags that override fields of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Frames per view (multiple of 25).
    #[arg(long)]
    pub seq_len: Option<usize>,
    /// Square input side (multiple of 16).
    #[arg(long)]
    pub hw: Option<usize>,
    #[arg(long)]
    pub init_seed: Option<u64>,
    /// Replace the motion-aware gating with the identity.
    #[arg(long)]
    pub no_motion_gating: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Seed for fold planning, shuffling, and augmentation.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, overrides_with = "no_augment")]
    pub augment: bool,
    #[arg(long)]
    pub no_augment: bool,
    #[arg(long)]
    pub augment_target: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let m = &mut cfg.model;
        let t = &mut cfg.train;
        if let Some(v) = self.seq_len {
            m.seq_len = v;
        }
        if let Some(v) = self.hw {
            m.input_hw = v;
        }
        if let Some(v) = self.init_seed {
            m.init_seed = v;
        }
        if self.no_motion_gating {
            m.motion_gating = false;
        }
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.lr {
            t.lr = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.seed {
            t.seed = v;
        }
        if self.augment {
            t.augmentation = true;
        }
        if self.no_augment {
            t.augmentation = false;
        }
        if let Some(v) = self.augment_target {
            t.augment_target = v;
        }
        if let Some(v) = self.folds {
            t.folds = v;
        }
        if let Some(v) = self.val_fraction {
            t.val_fraction = v;
        }
        if let Some(v) = &self.checkpoint_dir {
            t.checkpoint_dir = Some(v.clone());
        }
    }
}

/// Makes a path absolute against the working directory.
pub fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).with_context(|| format!("resolving {}", path.display()))
}
