//! Layers, blocks, loss, and optimizer.

mod adam;
mod attention;
pub(crate) mod blocks;
pub mod loss;

pub use adam::{AdamConfig, AdamState};
pub use attention::{attention, multi_attention_fusion};
pub use blocks::{
    conv2d_block, conv3d_block, dense_head, he_uniform, motion_aware, motion_aware_layers, Bound, LayerParams,
    CONV2D_FILTERS, CONV3D_BIAS_INIT, CONV3D_FILTERS, FEATURE_CHANNELS, GATE_BIAS_INIT, TEMPORAL_REDUCTION,
};
pub use loss::{cross_entropy, one_hot, LOG_EPS};
