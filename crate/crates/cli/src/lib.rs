//! Experiment driver for the `frobprec` toolkit: problem bundles on disk,
//! training, CG comparisons and report tables.
//!
//! A bundle is a directory holding `config.json`, `matrix.mtx`,
//! `coefficient.json`, `probes.mtx` (and `solutions.mtx`), factor files and
//! the CSV outputs, all listed with SHA-256 digests in `manifest.json`.

pub mod config;
pub mod manifest;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use manifest::Manifest;
pub use pipeline::{
    generate, report, solve, train, Bundle, Precond, ReportRecord, SolveRecord, TrainRecord,
};
