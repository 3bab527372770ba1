//! Orchestration behind the `neqc` binary: manifests, sweeps and artifact files.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 validation error. Validation
//! failures are raised as [`Invalid`] so `main` can tell them apart.

pub mod commands;
pub mod manifest;
pub mod output;

use std::fmt;

/// A user-input problem detected before any work starts.
#[derive(Debug, Clone, PartialEq)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.chain().any(|c| c.downcast_ref::<Invalid>().is_some()) {
        EXIT_VALIDATION
    } else {
        EXIT_RUNTIME
    }
}

/// Runs `f` on a rayon pool with `jobs` threads (0 = rayon's default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(f))
}
