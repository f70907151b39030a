//! Training loop, validation-based model selection, and cross-validation.

mod config;
mod cv;
mod fold;

pub use config::TrainConfig;
pub use cv::{
    check_leakage, checkpoint_path, fold_dir, load_cohort, prepare_fold, run_cross_validation, CvResult, CvSummary,
    FoldResult, FoldSummary, PreparedFold, FOLDS_FILE,
};
pub use fold::{evaluate, mean_loss, train_fold, EpochEvent, TrainLog};
