//! Experiment harness: SK generation, exhaustive ground states, residual-energy
//! and bit-error-rate sweeps, bootstrap intervals and report tables.

mod config;
mod experiment;
mod report;
mod sk;
pub mod stats;

use std::path::Path;

pub use config::{ExperimentConfig, Preset, Problem, ScheduleSource, Solver, SCHEDULE_SNR_DB};
pub use experiment::{
    ber_sweep, residual_sweep, run_experiment, ChannelRecord, ExperimentResults, GridRecord, RunRecord,
    ScheduleRecord,
};
pub use report::{report, BerRecord, GridCell, Report, ResidualRecord};
pub use sk::{gen_sk, ground_state_exhaustive, EXHAUSTIVE_MAX_SPINS};

use crate::error::Result;
use crate::ising::io::{read_json, write_json};

/// Runs `cfg` and writes `results.json` plus the report tables into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentResults> {
    let results = run_experiment(cfg)?;
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("results.json"), &results)?;
    report(std::slice::from_ref(&results)).write(dir)?;
    Ok(results)
}

/// Reads result files and writes the merged report into `dir`.
pub fn report_files(inputs: &[&Path], dir: &Path) -> Result<Report> {
    let results: Vec<ExperimentResults> = inputs.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    let rep = report(&results);
    rep.write(dir)?;
    Ok(rep)
}
