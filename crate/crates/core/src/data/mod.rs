//! Datasets on disk, frame handling, augmentation, and fold planning.

mod augment;
mod folds;
mod manifest;
mod sampling;
mod synth;
mod video;

pub use augment::{augment, balance_augment, source_subject, Flip, LoadedSample, Rotation, Transform};
pub use folds::{plan_folds, Fold, FoldPlan};
pub use manifest::{DatasetInfo, Label, Manifest, Side, VideoSample, DATASET_FILE, MANIFEST_FILE};
pub use sampling::{load_views, resize_bilinear, resize_video, sample_frames, sample_indices};
pub use synth::{generate_synthetic_cohort, side_motion_energy, SynthConfig, VIEWS_DIR};
pub use video::{read_video, write_video, Video, VIDEO_MAGIC, VIDEO_VERSION};
