//! RBF support-vector machines with sigmoid calibration, two-input LDA
//! fusion, nested chronological cross-validation and the three detectors.

mod detector;
mod folds;
mod grid;
mod kernel;
mod lda;
mod par;
mod platt;
mod smo;
mod svm;
mod threshold;

pub use detector::{
    cross_validate, fit_detectors, train_detector, transfer_evaluate, AccessAudit, CvOutput, DetectorModel, FoldResult,
    ModelKind, NoAudit, Purpose, Selection, TrainConfig, Views,
};
pub use folds::{inner_blocks, make_fold_plan, make_fold_plan_with, FoldPlan, OuterFold};
pub use grid::{grid_search, log2_grid, select_best, Grid, GridCell, GridResult};
pub use kernel::rbf;
pub use lda::{lda_train, LdaModel, LDA_RIDGE};
pub use smo::SmoConfig;
pub use svm::{contiguous_ranges, svm_predict_proba, svm_train, svm_train_with, SvmModel, SvmParams, TrainStats};
pub use threshold::select_threshold;
