//! Configuration, run manifest and pipeline stages behind the `tc` binary.

pub mod config;
pub mod manifest;
pub mod stages;

use tripcohort::Error;

pub use config::RunConfig;
pub use manifest::RunManifest;
pub use stages::{run_stage, RunLayout};

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::Format { .. } => 2,
        Error::Numeric(_) | Error::Diverged { .. } | Error::DegenerateVariance { .. } | Error::Fit(_) => 4,
        _ => 3,
    }
}

/// Sizes the global rayon pool from `TC_THREADS` when set.
pub fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("TC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("TC_THREADS=`{v}` is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}
