//! Monte Carlo driver: shared noiseless artifacts are built once, then every
//! trial adds its own seeded noise and runs both estimators.

use rayon::prelude::*;
use splitiv_core::dynamics::{add_noise, Trajectory};
use splitiv_core::estimator::{Estimate, Excitation};
use splitiv_core::pipeline::{estimate_both, reference_theta, ReferenceKind};
use splitiv_core::splitfilters::SplitFilterBank;
use splitiv_core::DMatrix;

use crate::config::ExperimentConfig;
use crate::error::Result;

/// Immutable artifacts shared by all trials of one experiment.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub trajectory: Trajectory,
    pub bank: SplitFilterBank,
    /// Exactness degree actually used by the filters.
    pub effective_p: usize,
    /// Why the requested degree was abandoned, if it was.
    pub fallback: Option<String>,
    pub reference: DMatrix<f64>,
    pub reference_kind: ReferenceKind,
    /// Regression times per trial.
    pub rows: usize,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let pipeline = &config.pipeline;
        let trajectory = pipeline.simulate()?;
        let (bank, cause) = pipeline.build_bank_with_fallback()?;
        let fallback = cause.map(|e| {
            log::warn!(
                "p = {} unusable ({e}); falling back to p = {}",
                pipeline.p,
                bank.hat_g.spec().exactness
            );
            e.to_string()
        });
        let (reference, reference_kind) = reference_theta(&trajectory, &bank, pipeline)?;
        let rows = bank.window_count(pipeline.n, pipeline.stride);
        Ok(Setup {
            config: config.clone(),
            effective_p: bank.hat_g.spec().exactness,
            trajectory,
            bank,
            fallback,
            reference,
            reference_kind,
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialEstimates {
    pub iv: Estimate,
    pub ls: Estimate,
    pub excitation: Excitation,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct TrialFailure {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: usize,
    pub outcome: Result<TrialEstimates, TrialFailure>,
}

impl TrialResult {
    pub fn estimates(&self) -> Option<&TrialEstimates> {
        self.outcome.as_ref().ok()
    }
}

/// One trial. Noise comes from stream `trial_index` of the master seed, so the
/// result depends only on the configuration and the index.
pub fn run_trial(setup: &Setup, trial_index: usize) -> TrialResult {
    let config = &setup.config;
    let outcome = add_noise(
        &setup.trajectory,
        config.eta(),
        config.master_seed,
        trial_index as u64,
    )
    .and_then(|m| estimate_both(&m.values, &setup.bank, &config.pipeline))
    .map(|out| TrialEstimates {
        iv: out.iv,
        ls: out.ls,
        excitation: out.excitation,
    })
    .map_err(|e| TrialFailure {
        kind: e.kind().to_string(),
        message: e.to_string(),
    });
    TrialResult {
        trial_index,
        outcome,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

/// All configured trials, sorted by index.
pub fn run_monte_carlo(setup: &Setup, execution: Execution) -> Vec<TrialResult> {
    let trials = setup.config.trials;
    let results: Vec<TrialResult> = match execution {
        Execution::Parallel => (0..trials)
            .into_par_iter()
            .map(|i| run_trial(setup, i))
            .collect(),
        Execution::Serial => (0..trials).map(|i| run_trial(setup, i)).collect(),
    };
    let failed = results.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        log::warn!("{failed} of {trials} trials failed");
    }
    results
}
