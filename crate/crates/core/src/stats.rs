//! Monte Carlo summaries: normalized bias, spread and risk of a set of
//! estimates, bootstrap standard errors and marginal kernel densities.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;

use crate::dynamics::noise_rng;
use crate::{Error, Result};

/// Percent errors, each normalized by the Frobenius norm of the reference.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorStats {
    /// Distance between the mean estimate and the reference.
    pub bias_pct: f64,
    /// Quadratic mean distance between the estimates and their mean.
    pub std_pct: f64,
    /// Quadratic mean distance between the estimates and the reference.
    pub rmse_pct: f64,
}

impl ErrorStats {
    /// `rmse^2 - bias^2 - std^2`, zero up to rounding.
    pub fn pythagorean_defect(&self) -> f64 {
        self.rmse_pct * self.rmse_pct - self.bias_pct * self.bias_pct - self.std_pct * self.std_pct
    }
}

pub fn summarize(estimates: &[DMatrix<f64>], reference: &DMatrix<f64>) -> Result<ErrorStats> {
    let indices: Vec<usize> = (0..estimates.len()).collect();
    summarize_indexed(estimates, &indices, reference)
}

fn summarize_indexed(
    estimates: &[DMatrix<f64>],
    indices: &[usize],
    reference: &DMatrix<f64>,
) -> Result<ErrorStats> {
    if indices.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: indices.len(),
        });
    }
    for &i in indices {
        if estimates[i].shape() != reference.shape() {
            return Err(Error::Dimension {
                what: "estimate entries",
                expected: reference.len(),
                found: estimates[i].len(),
            });
        }
    }
    let count = indices.len() as f64;
    let mut mean = DMatrix::zeros(reference.nrows(), reference.ncols());
    for &i in indices {
        mean += &estimates[i];
    }
    mean /= count;
    let mut spread = 0.0;
    let mut risk = 0.0;
    for &i in indices {
        spread += (&estimates[i] - &mean).norm_squared();
        risk += (&estimates[i] - reference).norm_squared();
    }
    let scale = 100.0 / reference.norm();
    Ok(ErrorStats {
        bias_pct: (&mean - reference).norm() * scale,
        std_pct: libm::sqrt(spread / count) * scale,
        rmse_pct: libm::sqrt(risk / count) * scale,
    })
}

/// Smallest accepted bootstrap resample count.
pub const MIN_RESAMPLES: usize = 100;

/// Nonparametric bootstrap standard errors of [`summarize`], resampling whole
/// trials with replacement.
pub fn bootstrap_se(
    estimates: &[DMatrix<f64>],
    reference: &DMatrix<f64>,
    resamples: usize,
    seed: u64,
) -> Result<ErrorStats> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::invalid(
            "resamples",
            alloc::format!("must be at least {MIN_RESAMPLES}"),
        ));
    }
    let n = estimates.len();
    summarize(estimates, reference)?;
    let mut rng = noise_rng(seed, 0);
    let mut draws = Vec::with_capacity(resamples);
    let mut indices = alloc::vec![0usize; n];
    for _ in 0..resamples {
        for slot in indices.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        draws.push(summarize_indexed(estimates, &indices, reference)?);
    }
    let sd = |f: fn(&ErrorStats) -> f64| {
        let mean = draws.iter().map(f).sum::<f64>() / resamples as f64;
        let var = draws
            .iter()
            .map(|s| (f(s) - mean) * (f(s) - mean))
            .sum::<f64>()
            / (resamples - 1) as f64;
        libm::sqrt(var)
    };
    Ok(ErrorStats {
        bias_pct: sd(|s| s.bias_pct),
        std_pct: sd(|s| s.std_pct),
        rmse_pct: sd(|s| s.rmse_pct),
    })
}

/// Gaussian kernel density on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub mean: f64,
}

impl Density {
    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
            .sum()
    }

    /// Grid point with the largest density.
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, d) in self.density.iter().enumerate() {
            if *d > self.density[best] {
                best = i;
            }
        }
        self.grid[best]
    }
}

/// Kernel density estimate with the normal-reference bandwidth
/// `1.06 s n^(-1/5)`. The grid covers `mean +- 4 s` widened to keep four
/// bandwidths around every sample. Degenerate samples get a bandwidth of
/// `1e-6 * max(1, |mean|)`.
pub fn kde(samples: &[f64], grid_points: usize) -> Result<Density> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: n,
        });
    }
    if grid_points < 2 {
        return Err(Error::invalid("grid_points", "must be at least 2"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("density samples"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = libm::sqrt(var);
    let mut bandwidth = 1.06 * sd * libm::pow(n as f64, -0.2);
    if !(bandwidth > 1e-12 * mean.abs().max(1.0)) {
        bandwidth = 1e-6 * mean.abs().max(1.0);
    }
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = (mean - 4.0 * sd).min(min - 4.0 * bandwidth);
    let hi = (mean + 4.0 * sd).max(max + 4.0 * bandwidth);
    let spacing = (hi - lo) / (grid_points - 1) as f64;
    let norm = 1.0 / (n as f64 * bandwidth * libm::sqrt(2.0 * core::f64::consts::PI));
    let grid: Vec<f64> = (0..grid_points).map(|i| lo + i as f64 * spacing).collect();
    let density = grid
        .iter()
        .map(|g| {
            norm * samples
                .iter()
                .map(|x| {
                    let u = (g - x) / bandwidth;
                    libm::exp(-0.5 * u * u)
                })
                .sum::<f64>()
        })
        .collect();
    Ok(Density {
        grid,
        density,
        bandwidth,
        mean,
    })
}
