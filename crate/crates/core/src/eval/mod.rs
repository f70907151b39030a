//! Confusion matrices, threshold metrics, ROC analysis, and report files.

mod metrics;
mod report;
mod roc;

pub use metrics::{cumulative_confusion, ConfusionMatrix, Metrics, MetricsReport, Percent, ScoredPrediction};
pub use report::{emit_report, loss_svg, metrics_json, roc_csv, roc_svg, LossCurve};
pub use roc::{roc_auc, RocCurve, RocPoint};

pub(crate) use metrics::round_to;
pub(crate) use report::write_file;
