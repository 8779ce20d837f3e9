//! Command-line front end for `graphgrow-core`.
//!
//! Every subcommand is converted into a [`RunConfig`], validated, and run by
//! [`execute`]. The same documents can be written by hand and passed with
//! `--config`.

pub mod args;
pub mod bench;
pub mod commands;
pub mod config;
pub mod error;

pub use commands::{execute, Manifest, Outcome, RunEntry, RunRecord, RunStatus};
pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Runs `cfg` on a pool of `jobs` threads, or rayon's default pool.
pub fn execute_with_jobs(cfg: &RunConfig, jobs: Option<usize>) -> CliResult<Outcome> {
    match jobs {
        None => execute(cfg),
        Some(0) => Err(CliError::config("--jobs must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(e.to_string()))?
            .install(|| execute(cfg)),
    }
}
