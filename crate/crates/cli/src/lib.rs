//! Experiment runner for `ccdl`: evaluates closed-form rates, Monte Carlo
//! estimates, stream optimizations and gains over parameter sweeps and
//! writes them as CSV.
//!
//! Parameters come from up to three layers, later ones winning: a named
//! preset, a JSON config file and command-line flags.

pub mod args;
pub mod error;
pub mod runner;
pub mod spec;

use std::fs::File;
use std::io::{self, BufWriter};

use ccdl::montecarlo::MIN_RELIABLE_TRIALS;

pub use error::CliError;
pub use runner::{run, write_csv, Row, COLUMNS};
pub use spec::{ExperimentSpec, SpecLayer};

use args::Flags;
use spec::{preset, Command, Measure};

/// Environment variable holding the worker count; `0` or unset means one
/// worker per core.
pub const THREADS_ENV: &str = "CCDL_THREADS";

/// Merges preset, config file and flags.
pub fn load_spec(command: Command, flags: &Flags) -> Result<ExperimentSpec, CliError> {
    let mut layer = SpecLayer::default();
    if let Some(name) = &flags.preset {
        layer = preset(name)?;
    }
    if let Some(path) = &flags.config {
        layer = layer.overlay(SpecLayer::from_file(path)?);
    }
    ExperimentSpec::resolve(command, layer.overlay(flags.layer()))
}

/// Warnings worth reporting before a run.
pub fn warnings(spec: &ExperimentSpec) -> Vec<String> {
    let mut out = Vec::new();
    if spec.measure == Measure::Simulate && spec.trials < MIN_RELIABLE_TRIALS {
        out.push(format!(
            "{} trials is below the {MIN_RELIABLE_TRIALS} needed for a reliable estimate",
            spec.trials
        ));
    }
    out
}

/// Runs `spec` and writes its CSV to `spec.out` or standard output.
pub fn execute(spec: &ExperimentSpec) -> Result<(), CliError> {
    let rows = run(spec)?;
    match &spec.out {
        Some(path) => write_csv(&rows, BufWriter::new(File::create(path)?)),
        None => write_csv(&rows, io::stdout().lock()),
    }
}

/// Reads [`THREADS_ENV`].
pub fn configured_threads() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::InvalidConfig(format!("{THREADS_ENV}={v:?} is not a worker count"))),
        Err(_) => Ok(0),
    }
}
