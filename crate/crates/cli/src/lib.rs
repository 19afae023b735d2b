//! Experiment harness around the `attrikernel` library: configuration
//! parsing, grid execution and report emission.

pub mod config;
pub mod experiment;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code for this error class (config/data problems exit 2).
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// Pin the number of OpenBLAS threads. The experiment runner parallelizes
/// over cells, so per-call BLAS threading would only oversubscribe cores and
/// make reduction orders depend on the machine.
pub fn set_blas_threads(n: usize) {
    unsafe extern "C" {
        fn openblas_set_num_threads(n: core::ffi::c_int);
    }
    unsafe { openblas_set_num_threads(n as core::ffi::c_int) }
}
