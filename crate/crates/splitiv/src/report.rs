//! Aggregation of trial results into summary statistics and density tables.

use serde::Serialize;
use splitiv_core::estimator::{Estimate, Method};
use splitiv_core::pipeline::ReferenceKind;
use splitiv_core::stats::{bootstrap_se, kde, summarize, ErrorStats};
use splitiv_core::DMatrix;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{Setup, TrialEstimates, TrialFailure, TrialResult};

/// Fewest successful trials for which densities are exported.
pub const MIN_KDE_TRIALS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub bias_pct: f64,
    pub std_pct: f64,
    pub rmse_pct: f64,
    /// Bootstrap standard errors of the three statistics.
    pub se: ErrorStats,
    /// `rmse^2 - bias^2 - std^2`
    pub pythagorean_defect: f64,
    /// `value ± se` renderings.
    pub formatted: Formatted,
    pub mean_theta: Vec<Vec<f64>>,
    pub mean_sigma_min: f64,
    /// Trials in which at least one singular value was clipped.
    pub trials_with_clipping: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Formatted {
    pub bias_pct: String,
    pub std_pct: String,
    pub rmse_pct: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialCounts {
    pub configured: usize,
    pub succeeded: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRecord {
    pub trial: usize,
    #[serde(flatten)]
    pub failure: TrialFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub eta: f64,
    pub effective_p: usize,
    pub filter_fallback: Option<String>,
    pub reference_kind: ReferenceKind,
    pub reference: Vec<Vec<f64>>,
    pub n_regression: usize,
    pub trials: TrialCounts,
    pub failures: Vec<FailureRecord>,
    pub iv: EstimatorSummary,
    pub ls: EstimatorSummary,
    pub bias_ratio_ls_over_iv: f64,
    pub rmse_ratio_ls_over_iv: f64,
    /// Fraction of trials whose plug-in excitation level exceeded `lambda`.
    pub excitation_rate: f64,
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn pick(e: &TrialEstimates, method: Method) -> &Estimate {
    match method {
        Method::Iv => &e.iv,
        Method::Ls => &e.ls,
    }
}

fn successes(results: &[TrialResult]) -> Vec<&TrialEstimates> {
    results.iter().filter_map(TrialResult::estimates).collect()
}

fn estimator_summary(
    ok: &[&TrialEstimates],
    method: Method,
    reference: &DMatrix<f64>,
    resamples: usize,
    seed: u64,
) -> Result<EstimatorSummary> {
    let thetas: Vec<DMatrix<f64>> = ok.iter().map(|e| pick(e, method).theta.clone()).collect();
    let stats = summarize(&thetas, reference)?;
    let se = bootstrap_se(&thetas, reference, resamples, seed)?;
    let count = thetas.len() as f64;
    let mean = thetas.iter().fold(
        DMatrix::zeros(reference.nrows(), reference.ncols()),
        |acc, t| acc + t,
    ) / count;
    let show = |v: f64, s: f64| format!("{v:.4} ± {s:.4}");
    Ok(EstimatorSummary {
        bias_pct: stats.bias_pct,
        std_pct: stats.std_pct,
        rmse_pct: stats.rmse_pct,
        se,
        pythagorean_defect: stats.pythagorean_defect(),
        formatted: Formatted {
            bias_pct: show(stats.bias_pct, se.bias_pct),
            std_pct: show(stats.std_pct, se.std_pct),
            rmse_pct: show(stats.rmse_pct, se.rmse_pct),
        },
        mean_theta: rows_of(&mean),
        mean_sigma_min: ok.iter().map(|e| pick(e, method).sigma_min_zx).sum::<f64>() / count,
        trials_with_clipping: ok
            .iter()
            .filter(|e| pick(e, method).clipped_directions > 0)
            .count(),
    })
}

pub fn summarize_trials(setup: &Setup, results: &[TrialResult]) -> Result<Summary> {
    let config = &setup.config;
    let ok = successes(results);
    let failures: Vec<FailureRecord> = results
        .iter()
        .filter_map(|r| {
            r.outcome.as_ref().err().map(|f| FailureRecord {
                trial: r.trial_index,
                failure: f.clone(),
            })
        })
        .collect();
    if ok.len() < 2 {
        return Err(HarnessError::TooManyFailures {
            failed: failures.len(),
            total: results.len(),
        });
    }
    // Distinct bootstrap streams per estimator, both fixed by the master seed.
    let iv = estimator_summary(
        &ok,
        Method::Iv,
        &setup.reference,
        config.bootstrap_resamples,
        config.master_seed,
    )?;
    let ls = estimator_summary(
        &ok,
        Method::Ls,
        &setup.reference,
        config.bootstrap_resamples,
        config.master_seed.wrapping_add(1),
    )?;
    Ok(Summary {
        config: config.clone(),
        eta: config.eta(),
        effective_p: setup.effective_p,
        filter_fallback: setup.fallback.clone(),
        reference_kind: setup.reference_kind,
        reference: rows_of(&setup.reference),
        n_regression: setup.rows,
        trials: TrialCounts {
            configured: results.len(),
            succeeded: ok.len(),
            failed: failures.len(),
        },
        failures,
        bias_ratio_ls_over_iv: ls.bias_pct / iv.bias_pct,
        rmse_ratio_ls_over_iv: ls.rmse_pct / iv.rmse_pct,
        excitation_rate: ok.iter().filter(|e| e.excitation.satisfied).count() as f64
            / ok.len() as f64,
        iv,
        ls,
    })
}

/// One row of the density export.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeRow {
    pub entry_row: usize,
    pub entry_col: usize,
    pub estimator: Method,
    pub grid_value: f64,
    pub density: f64,
    pub mean: f64,
    pub reference: f64,
}

/// Marginal densities of every parameter entry for both estimators.
pub fn kde_table(setup: &Setup, results: &[TrialResult]) -> Result<Vec<KdeRow>> {
    let ok = successes(results);
    if ok.len() < MIN_KDE_TRIALS {
        return Err(splitiv_core::Error::InsufficientData {
            needed: MIN_KDE_TRIALS,
            found: ok.len(),
        }
        .into());
    }
    let reference = &setup.reference;
    let mut rows = Vec::new();
    for method in [Method::Iv, Method::Ls] {
        for i in 0..reference.nrows() {
            for j in 0..reference.ncols() {
                let samples: Vec<f64> = ok.iter().map(|e| pick(e, method).theta[(i, j)]).collect();
                let density = kde(&samples, setup.config.kde_grid)?;
                rows.extend(
                    density
                        .grid
                        .iter()
                        .zip(&density.density)
                        .map(|(&g, &d)| KdeRow {
                            entry_row: i,
                            entry_col: j,
                            estimator: method,
                            grid_value: g,
                            density: d,
                            mean: density.mean,
                            reference: reference[(i, j)],
                        }),
                );
            }
        }
    }
    Ok(rows)
}
