//! Moment bound for clipped random inverses and the convergence-rate
//! expressions used to pick window sizes.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::noise_rng;
use crate::{Error, Result};

/// Arguments of the bound on `|| 1 / (a + max(0, b - W)) ||_r` for a
/// nonnegative `W` with `P(W >= t) <= exp(-t^2 / K^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GammaParams {
    /// Moment order, at least 1.
    pub r: f64,
    /// Inner floor.
    pub a: f64,
    /// Outer level, above `a`.
    pub b: f64,
    /// Subgaussian scale of `W`.
    pub k: f64,
}

impl GammaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 1.0 && self.r.is_finite()) {
            return Err(Error::invalid("r", "must be a finite value >= 1"));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::invalid("k", "must be positive and finite"));
        }
        if !(self.a > 0.0 && self.a < self.b && self.b.is_finite()) {
            return Err(Error::invalid("a", "requires 0 < a < b < inf"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GammaValue {
    pub head: f64,
    pub body: f64,
    pub tail: f64,
    pub total: f64,
}

/// Head, body and tail of the moment bound, with the constants of the
/// layer-cake argument made explicit:
///
/// ```text
/// head = 2 / b
/// body = (r K sqrt(pi))^(1/r) / b^(2 (1 + 1/r))
///        * exp(K^2 (r + 1)^2 log^2(a / b) / (4 r (b - a)^2))
/// tail = exp(-b^2 / (r K^2)) / a
/// ```
///
/// `sqrt(pi) K` and the 4 come from the Gaussian integral
/// `int exp(-s^2 / K^2 + c s) ds = sqrt(pi) K exp(c^2 K^2 / 4)`.
pub fn gamma(params: &GammaParams) -> Result<GammaValue> {
    params.validate()?;
    let GammaParams { r, a, b, k } = *params;
    let head = 2.0 / b;
    let log_ratio = libm::log(a / b);
    let exponent =
        k * k * (r + 1.0) * (r + 1.0) * log_ratio * log_ratio / (4.0 * r * (b - a) * (b - a));
    let body = libm::pow(r * k * libm::sqrt(core::f64::consts::PI), 1.0 / r)
        / libm::pow(b, 2.0 * (1.0 + 1.0 / r))
        * libm::exp(exponent);
    let tail = libm::exp(-b * b / (r * k * k)) / a;
    Ok(GammaValue {
        head,
        body,
        tail,
        total: head + body + tail,
    })
}

/// Moment order seen by the bound after a Holder split with parameter `eps`:
/// `q (1 + 1 / eps)`.
pub fn holder_order(q: f64, eps: f64) -> f64 {
    q * (1.0 + 1.0 / eps)
}

/// Monte Carlo estimate of the moment the bound controls.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GammaCheck {
    /// `(E X^r)^(1/r)`
    pub empirical_lr: f64,
    pub bound: f64,
    /// `empirical_lr / bound`
    pub ratio: f64,
}

/// Minimum sample count accepted by [`mc_check_gamma`].
pub const MIN_GAMMA_TRIALS: usize = 10_000;

/// Samples `W = |N(0, K^2 / 2)|`, whose tail `erfc(t / K)` satisfies the
/// hypothesis, and compares `||X||_r` with [`gamma`].
pub fn mc_check_gamma(params: &GammaParams, trials: usize, seed: u64) -> Result<GammaCheck> {
    let bound = gamma(params)?.total;
    if trials < MIN_GAMMA_TRIALS {
        return Err(Error::InsufficientData {
            needed: MIN_GAMMA_TRIALS,
            found: trials,
        });
    }
    let GammaParams { r, a, b, k } = *params;
    let scale = k / core::f64::consts::SQRT_2;
    let mut rng = noise_rng(seed, 0);
    // Normalize by 1/a (the largest possible X) so huge r cannot overflow.
    let mut acc = 0.0;
    for _ in 0..trials {
        let g: f64 = rng.sample(StandardNormal);
        let w = scale * g.abs();
        let x = 1.0 / (a + (b - w).max(0.0));
        acc += libm::pow(x * a, r);
    }
    let empirical_lr = libm::pow(acc / trials as f64, 1.0 / r) / a;
    Ok(GammaCheck {
        empirical_lr,
        bound,
        ratio: empirical_lr / bound,
    })
}

/// `h^((p - d) / (2p + 1)) + sqrt(1 / (n h^(2p / (2p + 1))))`
pub fn corollary_rate(n: usize, h: f64, p: usize, d: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", "must be positive and finite"));
    }
    if d >= p {
        return Err(Error::invalid("d", "must be below p"));
    }
    let p = p as f64;
    let d = d as f64;
    let denom = 2.0 * p + 1.0;
    let bias = libm::pow(h, (p - d) / denom);
    let noise = libm::sqrt(1.0 / (n as f64 * libm::pow(h, 2.0 * p / denom)));
    Ok(bias + noise)
}

/// Window size `h^(-2p / (2p + 1))` that balances filter bias and noise.
pub fn ideal_window(h: f64, p: usize) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::invalid("h", "must lie in (0, 1)"));
    }
    if p == 0 {
        return Err(Error::invalid("p", "must be at least 1"));
    }
    let p = p as f64;
    Ok(libm::pow(h, -2.0 * p / (2.0 * p + 1.0)))
}
