//! Cross-validation harness: stratified folds, the training loop, metrics,
//! and report export.

pub mod cv;
pub mod folds;
pub mod metrics;
pub mod report;
mod svg;
pub mod train;

pub use cv::{cross_validate, CvOptions, CvReport, FoldReport};
pub use folds::{check_leakage, stratified_kfold, FoldSplit};
pub use metrics::{accuracy_header, accuracy_row, evaluate_predictions, roc_auc, ClassMetrics, MetricsReport, RocCurve};
pub use report::{export_attention, export_report, FoldEntry, MetricsFile};
pub use train::{argmax, mean_loss, predict, FeatureSet, LossCurves, TrainConfig, Trainer};
