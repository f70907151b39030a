//! Dense tensors, reverse-mode autodiff, and a four-view motion-aware
//! attention-fusion video classifier with its data, training, and
//! evaluation pipeline.
//!
//! Layout:
//! - [`tensor`]: the `Tensor` type and its numerical kernels.
//! - [`autodiff`]: the [`Graph`](autodiff::Graph) abstraction with an eager
//!   evaluator and a gradient tape, plus finite-difference checking.
//! - [`nn`]: blocks, attention, loss, and the Adam optimizer.
//! - [`model`]: the assembled network, its weights and checkpoints.
//! - [`data`]: video files, manifests, sampling, augmentation, fold plans,
//!   and the synthetic cohort generator.
//! - [`eval`]: confusion matrices, metrics, ROC/AUC and report emission.
//! - [`training`]: the training loop and the cross-validation driver.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod tensor;
pub mod training;

pub use autodiff::{Eager, Graph, Tape, Var};
pub use error::{Error, Result};
pub use model::{ModelConfig, ModelWeights};
pub use tensor::{ParamSet, Scalar, Tensor};
