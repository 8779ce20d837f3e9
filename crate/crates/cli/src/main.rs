use std::process::ExitCode;

use clap::Parser;
use graphgrow_cli::args::Cli;
use graphgrow_cli::{execute_with_jobs, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let jobs = cli.jobs;
    let result = cli.resolve().and_then(|cfg| execute_with_jobs(&cfg, jobs));
    match result {
        Ok(outcome) if outcome.failures == 0 => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!(
                "graphgrow: {} run(s) failed; outputs written to {}",
                outcome.failures,
                outcome.out_dir.display()
            );
            ExitCode::from(CliError::COMPUTE_EXIT)
        }
        Err(e) => {
            eprintln!("graphgrow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
