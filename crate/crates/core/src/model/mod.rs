//! The assembled four-view network.

mod checkpoint;
mod config;
mod forward;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::ModelConfig;
pub use forward::{bind, forward, forward_batch, ForwardTrace, NUM_CLASSES, NUM_VIEWS};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Eager;
use crate::error::Result;
use crate::nn::{self, blocks};
use crate::tensor::{ParamSet, Tensor};

/// All trainable tensors of one model plus the config they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    pub params: ParamSet,
}

pub(crate) fn branch_prefix(i: usize) -> String {
    format!("branch{i}")
}

impl ModelWeights {
    /// Fresh He-uniform weights drawn from `config.init_seed`.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut layers = Vec::new();
        for i in 0..NUM_VIEWS {
            let b = branch_prefix(i);
            layers.extend(blocks::conv2d_block_layers(&format!("{b}.conv2d"), config.channels, &mut rng)?);
            layers.extend(blocks::motion_aware_layers(&format!("{b}.motion"), nn::FEATURE_CHANNELS, &mut rng)?);
        }
        layers.extend(blocks::conv3d_block_layers("conv3d", &mut rng)?);
        layers.extend(blocks::dense_head_layers(
            "head",
            config.head_width(),
            config.head_hidden,
            NUM_CLASSES,
            &mut rng,
        )?);
        let mut params = ParamSet::new();
        for l in layers {
            l.insert_into(&mut params);
        }
        Ok(Self {
            config: config.clone(),
            params,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Positive-class probability pair for one subject.
    pub fn predict(&self, views: &[Tensor]) -> Result<Tensor> {
        let mut g = Eager::new();
        let bound = bind(&mut g, &self.params);
        let views: Vec<Tensor> = views.to_vec();
        let (out, _) = forward(&mut g, &self.config, &bound, &views)?;
        crate::tensor::reshape(&out, &[NUM_CLASSES])
    }

    /// Probabilities `[B, 2]` for a batch of subjects.
    pub fn predict_batch(&self, subjects: &[Vec<Tensor>]) -> Result<Tensor> {
        let mut g = Eager::new();
        let bound = bind(&mut g, &self.params);
        forward_batch(&mut g, &self.config, &bound, subjects)
    }
}
