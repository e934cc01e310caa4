//! Experiment runner for the renormalized KPZ lattice.

pub mod config;
pub mod experiments;
pub mod report;

use std::time::Instant;

use anyhow::Result;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use report::{Criterion, Diagnostic, ExperimentResult};

#[derive(Debug)]
pub struct Outcome {
    pub results: Vec<ExperimentResult>,
    pub summary: std::path::PathBuf,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.results.iter().all(ExperimentResult::pass)
    }
}

/// Validates, runs and writes every artifact into `cfg.output_dir`.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    let start = Instant::now();
    let results = experiments::run(cfg)?;
    let summary = report::write_report(
        &cfg.output_dir,
        cfg,
        &results,
        start.elapsed().as_secs_f64(),
    )?;
    Ok(Outcome { results, summary })
}
