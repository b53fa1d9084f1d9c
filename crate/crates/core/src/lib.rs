//! Cross-condition bearing fault diagnosis.
//!
//! Vibration recordings are windowed and turned into FFT amplitude spectra,
//! a labeled training domain and an unlabeled test domain are projected into a
//! shared subspace that jointly shrinks the marginal and class-conditional
//! maximum mean discrepancy, and test samples are classified by 1-NN in that
//! subspace. Pseudo-labels for the test domain are refined over several
//! rounds.
//!
//! Module map:
//! - [`signal_synth`]: synthetic defective-bearing signals
//! - [`ingest`]: file loading, windowing, FFT features, domain assembly
//! - [`numlin`]: dense symmetric / generalized eigensolvers and PCA
//! - [`adapt`]: MMD matrices, the adaptation solve and the refinement loop
//! - [`classify`]: 1-NN, accuracy, confusion, ROC
//! - [`bench`]: transfer-matrix harness, sweeps and report emission

pub mod adapt;
pub mod bench;
pub mod classify;
pub mod error;
pub mod ingest;
pub mod numlin;
pub mod par;
pub mod signal_synth;

pub use error::{Error, Result};
pub use par::Exec;
pub use signal_synth::{FaultClass, FaultSpec, OperatingCondition};
