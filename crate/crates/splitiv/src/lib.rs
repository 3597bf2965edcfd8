//! Experiment harness on top of `splitiv-core`: configuration manifests, a
//! seeded parallel Monte Carlo driver, summary statistics and CSV/JSON output.

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod report;

use std::path::Path;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{run_monte_carlo, run_trial, Execution, Setup, TrialResult};
pub use report::{kde_table, summarize_trials, Summary};

/// Everything a benchmark run produces.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub setup: Setup,
    pub results: Vec<TrialResult>,
    pub summary: Summary,
}

/// Runs the full Monte Carlo experiment described by `config`.
pub fn run_benchmark(config: &ExperimentConfig, execution: Execution) -> Result<Benchmark> {
    let setup = Setup::new(config)?;
    let results = run_monte_carlo(&setup, execution);
    let summary = summarize_trials(&setup, &results)?;
    Ok(Benchmark {
        setup,
        results,
        summary,
    })
}

impl Benchmark {
    /// Writes `trials.csv`, `summary.json` and, with enough trials, `kde.csv`.
    pub fn write(&self, dir: &Path) -> Result<io::BenchmarkFiles> {
        let kde = match kde_table(&self.setup, &self.results) {
            Ok(rows) => Some(rows),
            Err(e) => {
                log::warn!("skipping kde.csv: {e}");
                None
            }
        };
        io::write_benchmark(dir, &self.results, &self.summary, kde.as_deref())
    }
}
