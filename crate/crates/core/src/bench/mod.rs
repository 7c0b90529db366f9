//! Experiment drivers: dataset ingestion, the kernel-approximation sweep,
//! the regression benchmark and report emission.

mod config;
mod dataset;
mod kernel_approx;
mod model_file;
mod regression;
mod report;
mod synthetic;

pub use config::{DatasetSource, DatasetSpec, Experiment, ExperimentConfig, ReportFormat, TrainingSettings};
pub use dataset::{load_csv, load_feature_columns, split_standardize, train_size, Dataset, Scaler, Split};
pub use kernel_approx::{approx_error, approx_inputs, run_kernel_approx, KernelApproxRow, SAMPLERS};
pub use model_file::ModelBundle;
pub use regression::{
    evaluate, fit_method, resolve_dataset, rstar, run_regression, timing_rows, tune_lengthscale, Method,
    MethodSettings, RegressionRow, RowStatus, TimingRow, METHODS,
};
pub use report::{emit_report, format_float, parse_report, render_report, Cell, ReportRow};
pub use synthetic::{synthetic_dataset, SyntheticSpec};
