//! Experiment harness: configuration, the transfer-matrix / λ-sweep / ROC
//! drivers, and report emission.

pub mod config;
pub mod harness;
pub mod report;

pub use config::{CellSpec, CorpusSource, ExperimentConfig, ManifestSource, Method, ReportFormat};
pub use harness::{
    lambda_sweep, lambda_sweep_with, load_corpus, roc_study, roc_study_with, run_transfer_matrix,
    run_transfer_matrix_with, write_models, CellModel, Domains, RunOutput,
};
pub use report::{emit_report, TransferReport};
