//! The `slln` command line: config ingestion, experiment dispatch and CSV
//! output.

pub mod config;
pub mod error;
pub mod run;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

pub use config::{parse_config, parse_config_with, ExperimentConfig, ExperimentKind};
pub use error::{exit, CliError};
pub use run::{run, Outcome};

/// Environment variable capping the worker threads.
pub const THREADS_VAR: &str = "SLLN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "slln", version, about = "Exact sub-linear expectations and strong-law experiments")]
pub struct Args {
    /// Experiment to run.
    #[arg(value_enum, value_name = "SUBCOMMAND", required_unless_present = "list_fixtures")]
    pub experiment: Option<ExperimentKind>,
    /// `key=value` settings applied over the config file, e.g. `n=3` or
    /// `tolerances.epsilon=0.1`.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for CSV artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the built-in fixtures and exit.
    #[arg(long)]
    pub list_fixtures: bool,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR}={value:?} is not a positive integer")))?;
    // A pool built earlier in the same process wins; results do not depend
    // on the thread count.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn execute(args: Args, stdout: &mut dyn Write) -> Result<i32, CliError> {
    if args.list_fixtures {
        for (name, description) in slln_core::fixtures::FIXTURES {
            writeln!(stdout, "{name}\t{description}")?;
        }
        return Ok(exit::OK);
    }
    init_threads()?;
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let config = parse_config_with(&text, &args.overrides, args.experiment, args.seed, args.out)?;
    let outcome = run(&config)?;
    for line in &outcome.summary {
        writeln!(stdout, "{line}")?;
    }
    for path in outcome.write_artifacts(&config.out)? {
        writeln!(stdout, "wrote {}", path.display())?;
    }
    for failure in &outcome.failures {
        writeln!(stdout, "FAIL: {failure}")?;
    }
    Ok(outcome.exit_code())
}

/// Runs the command line and returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(args) => args,
        Err(err) => {
            let code = if err.use_stderr() { exit::CONFIG } else { exit::OK };
            let text = err.render().to_string();
            let _ = if err.use_stderr() { write!(stderr, "{text}") } else { write!(stdout, "{text}") };
            return code;
        }
    };
    match execute(args, stdout) {
        Ok(code) => code,
        Err(err) => {
            let _ = writeln!(stderr, "error: {err}");
            err.exit_code()
        }
    }
}
