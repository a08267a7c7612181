//! Metrics, fold construction, and evaluation protocols.

pub mod folds;
pub mod metrics;
pub mod protocol;

pub use folds::{group_kfold, logo_folds, stratified_group_kfold, Fold, FoldPlan};
pub use metrics::{mae, smape, Metric};
pub use protocol::{
    logo_evaluate, shortterm_evaluate, tune_spec, write_station_csv, EvalOptions,
    EvaluationReport, Scale, SelectionSettings, StationScore, TuneSettings,
};
