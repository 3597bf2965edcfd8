//! Minimum-norm local polynomial filters.
//!
//! A filter is a stencil of `N` weights applied to samples `f(k h)`,
//! `k = 1..=N`, that returns the `d`-th derivative at `i0 h` exactly whenever
//! `f` is a polynomial of degree below `p`. Among all stencils with that
//! property the one with the smallest Euclidean norm is chosen, which keeps
//! the noise gain as small as the exactness constraints allow.
//!
//! The constraints are written in a Legendre basis on the window mapped to
//! `[-1, 1]` and solved through a Householder QR factorization. The minimum-norm
//! solution depends only on the polynomial space, not the basis, so this gives
//! the same stencil as the monomial formulation without forming its
//! Hilbert-like normal matrix.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Largest accepted relative residual of the constraint solve.
pub const SOLVE_TOLERANCE: f64 = 1e-8;

/// Shape of a local polynomial filter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FilterSpec {
    /// Number of samples `N`.
    pub window: usize,
    /// Sample spacing `h` in time units.
    pub step: f64,
    /// Target location `i0` in grid units; the filter evaluates at `i0 * step`
    /// with samples located at `1..=window`.
    pub location: f64,
    /// Derivative order `d` of the row this filter is built for.
    pub derivative: usize,
    /// Exactness degree `p`: polynomials of degree `<= p - 1` are reproduced.
    pub exactness: usize,
    /// Highest derivative order `m` computed; the weights have `m + 1` rows.
    pub max_derivative: usize,
}

impl FilterSpec {
    /// Filter description with `max_derivative == derivative`.
    pub fn new(
        window: usize,
        step: f64,
        location: f64,
        derivative: usize,
        exactness: usize,
    ) -> Self {
        FilterSpec {
            window,
            step,
            location,
            derivative,
            exactness,
            max_derivative: derivative,
        }
    }

    pub fn with_max_derivative(mut self, max_derivative: usize) -> Self {
        self.max_derivative = max_derivative;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("window", "must be positive"));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::invalid("step", "must be positive and finite"));
        }
        let upper = self.window as f64 + 1.0;
        if !(self.location.is_finite() && self.location > 0.0 && self.location < upper) {
            return Err(Error::invalid(
                "location",
                alloc::format!("{} is outside (0, {})", self.location, upper),
            ));
        }
        if self.exactness == 0 {
            return Err(Error::invalid("exactness", "must be at least 1"));
        }
        if self.derivative > self.max_derivative {
            return Err(Error::invalid("derivative", "exceeds max_derivative"));
        }
        if self.max_derivative >= self.exactness {
            return Err(Error::invalid(
                "max_derivative",
                "must be below the exactness degree",
            ));
        }
        if self.exactness > self.window {
            return Err(Error::RankDeficient {
                rank: self.window,
                required: self.exactness,
            });
        }
        Ok(())
    }

    fn center(&self) -> f64 {
        (self.window as f64 + 1.0) / 2.0
    }

    fn half_width(&self) -> f64 {
        ((self.window as f64 - 1.0) / 2.0).max(0.5)
    }
}

/// Stencil weights, one row per derivative order `0..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterWeights {
    spec: FilterSpec,
    coefficients: DMatrix<f64>,
    residual: f64,
}

impl FilterWeights {
    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    /// `(m + 1) x N` coefficient matrix.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    /// Relative residual achieved by the constraint solve.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn window(&self) -> usize {
        self.spec.window
    }

    /// Weights of derivative row `d`, or `None` if `d > m`.
    pub fn row(&self, d: usize) -> Option<Vec<f64>> {
        (d <= self.spec.max_derivative).then(|| self.coefficients.row(d).iter().copied().collect())
    }

    /// Weights of the row the filter was built for.
    pub fn stencil(&self) -> Vec<f64> {
        self.coefficients
            .row(self.spec.derivative)
            .iter()
            .copied()
            .collect()
    }

    /// Contracts row `d` with `samples`.
    pub fn apply(&self, samples: &[f64], d: usize) -> Result<f64> {
        if samples.len() != self.spec.window {
            return Err(Error::Dimension {
                what: "filter samples",
                expected: self.spec.window,
                found: samples.len(),
            });
        }
        if d > self.spec.max_derivative {
            return Err(Error::Dimension {
                what: "filter row",
                expected: self.spec.max_derivative,
                found: d,
            });
        }
        Ok(self
            .coefficients
            .row(d)
            .iter()
            .zip(samples)
            .map(|(w, s)| w * s)
            .sum())
    }

    /// Spectral norm of the coefficient matrix.
    pub fn operator_norm(&self) -> f64 {
        self.coefficients
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .fold(0.0, |acc: f64, &s| acc.max(s))
    }
}

/// Builds the minimum-norm filter for `spec`.
pub fn build_filter(spec: &FilterSpec) -> Result<FilterWeights> {
    spec.validate()?;
    let n = spec.window;
    let p = spec.exactness;
    let m = spec.max_derivative;
    let center = spec.center();
    let half = spec.half_width();

    let mut basis = DMatrix::<f64>::zeros(n, p);
    for k in 0..n {
        let u = ((k + 1) as f64 - center) / half;
        let values = legendre_table(u, p, 0);
        for j in 0..p {
            basis[(k, j)] = values[j];
        }
    }

    // Targets in grid units: d/dx = d/du / (half * h).
    let u0 = (spec.location - center) / half;
    let table = legendre_table(u0, p, m);
    let targets = DMatrix::from_fn(p, m + 1, |j, d| table[d * p + j]);

    let qr = basis.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let cutoff = diag_max * f64::EPSILON * n as f64;
    let rank = r.diagonal().iter().filter(|v| v.abs() > cutoff).count();
    if rank < p {
        return Err(Error::RankDeficient { rank, required: p });
    }
    let multipliers = r
        .tr_solve_upper_triangular(&targets)
        .ok_or(Error::RankDeficient { rank, required: p })?;
    let grid_weights = qr.q() * multipliers;

    let mut residual = 0.0f64;
    for d in 0..=m {
        let achieved = basis.tr_mul(&grid_weights.column(d));
        let target = targets.column(d);
        let scale = target.norm().max(f64::MIN_POSITIVE);
        residual = residual.max((achieved - target).norm() / scale);
    }
    if !(residual <= SOLVE_TOLERANCE) {
        return Err(Error::Conditioning {
            residual,
            tolerance: SOLVE_TOLERANCE,
        });
    }

    let mut coefficients = grid_weights.transpose();
    for d in 0..=m {
        let scale = libm::pow(half * spec.step, d as f64);
        coefficients.row_mut(d).unscale_mut(scale);
    }

    Ok(FilterWeights {
        spec: *spec,
        coefficients,
        residual,
    })
}

/// Rate expressions for a filter's bias and noise, without constants.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FilterRates {
    /// `(N h)^(p - d)`
    pub bias_order: f64,
    /// `N^(-d - 1/2) h^(-d)`
    pub noise_order: f64,
}

pub fn theoretical_rates(spec: &FilterSpec) -> FilterRates {
    rate_orders(
        spec.window as f64,
        spec.step,
        spec.exactness,
        spec.derivative,
    )
}

/// [`theoretical_rates`] for a real-valued window size.
pub fn rate_orders(window: f64, step: f64, exactness: usize, derivative: usize) -> FilterRates {
    let d = derivative as f64;
    FilterRates {
        bias_order: libm::pow(window * step, exactness as f64 - d),
        noise_order: libm::pow(window, -d - 0.5) * libm::pow(step, -d),
    }
}

/// Legendre polynomials `P_j^(d)(u)` for `j < p`, `d <= m`, row-major in `d`.
pub(crate) fn legendre_table(u: f64, p: usize, m: usize) -> Vec<f64> {
    let mut table = alloc::vec![0.0; (m + 1) * p];
    for d in 0..=m {
        for j in 0..p {
            let value = match j {
                0 => {
                    if d == 0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                1 => match d {
                    0 => u,
                    1 => 1.0,
                    _ => 0.0,
                },
                _ => {
                    // j P_j = (2j - 1) u P_{j-1} - (j - 1) P_{j-2}, differentiated d times
                    let jf = j as f64;
                    let prev = table[d * p + j - 1];
                    let prev2 = table[d * p + j - 2];
                    let lower = if d == 0 {
                        0.0
                    } else {
                        table[(d - 1) * p + j - 1]
                    };
                    ((2.0 * jf - 1.0) * (u * prev + d as f64 * lower) - (jf - 1.0) * prev2) / jf
                }
            };
            table[d * p + j] = value;
        }
    }
    table
}
