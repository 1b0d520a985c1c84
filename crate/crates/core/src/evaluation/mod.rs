//! Nested grouped cross-validation and classification metrics.

mod cv;
mod folds;
mod metrics;
mod predictions;

pub use cv::{run_nested_cv, ClassDetection, CvOutcome, DetectorArm, FoldResult, MetricReport, SpmArmConfig};
pub use folds::{inner_split, stratified_group_kfold, FoldPlan, FoldSpec, GroupedLabels};
pub use metrics::{binarize, f1, mcc, BinaryClass, ClassConfusion, ConfusionMatrix, Summary};
pub use predictions::{parse_predictions, read_predictions, Prediction};
