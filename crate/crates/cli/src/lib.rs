//! Command-line front end: argument parsing, scenario files, experiment
//! dispatch and result files.

pub mod args;
pub mod error;
pub mod output;
pub mod run;
pub mod scenarios;

pub use args::{parse_args, Command, Overrides, RunConfig};
pub use error::CliError;
pub use output::{emit_experiment, emit_results, read_results, render_csv};
pub use run::{compute, run};
pub use scenarios::{load_scenarios, DivestSettings, ScenarioPack};

/// Sizes the global worker pool from `AMBISTOP_THREADS` when it is set to
/// a positive integer.
pub fn init_thread_pool() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("AMBISTOP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("AMBISTOP_THREADS must be a positive integer, got `{raw}`")))?;
    // a pool that is already initialised keeps its size
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::warn!("worker pool already initialised; AMBISTOP_THREADS ignored");
    }
    Ok(())
}
