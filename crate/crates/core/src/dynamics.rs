//! Sinusoidally forced Lorenz system: simulation, features, noise.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::splitfilters::FeatureMap;
use crate::{Error, Result};

/// Number of regressors in the Lorenz feature map.
pub const FEATURE_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    /// Frequency `f` of the forcing `sin(2 pi f t)`.
    pub forcing_freq: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            forcing_freq: 1.0,
        }
    }
}

fn forcing(t: f64, freq: f64) -> f64 {
    libm::sin(2.0 * core::f64::consts::PI * freq * t)
}

/// Right-hand side with the forcing entering the third equation additively:
///
/// ```text
/// x1' = sigma (x2 - x1)
/// x2' = x1 (rho - x3) - x2
/// x3' = u(t) + x1 x2 - beta x3,   u(t) = sin(2 pi f t)
/// ```
pub fn lorenz_rhs(t: f64, state: &[f64; 3], params: &LorenzParams) -> [f64; 3] {
    let [x1, x2, x3] = *state;
    [
        params.sigma * (x2 - x1),
        x1 * (params.rho - x3) - x2,
        forcing(t, params.forcing_freq) + x1 * x2 - params.beta * x3,
    ]
}

/// `(sin(2 pi f t), x1, x2, x3, x1 x2, x1 x3)`
pub fn feature_map(t: f64, state: &[f64; 3], forcing_freq: f64) -> [f64; FEATURE_DIM] {
    let [x1, x2, x3] = *state;
    [forcing(t, forcing_freq), x1, x2, x3, x1 * x2, x1 * x3]
}

/// [`feature_map`] as a [`FeatureMap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzFeatures {
    pub forcing_freq: f64,
}

impl FeatureMap for LorenzFeatures {
    fn dim(&self) -> usize {
        FEATURE_DIM
    }

    fn eval(&self, t: f64, state: &[f64], out: &mut [f64]) {
        let [x1, x2, x3] = [state[0], state[1], state[2]];
        out.copy_from_slice(&feature_map(t, &[x1, x2, x3], self.forcing_freq));
    }
}

/// Parameter matrix `theta0` (6 x 3) with `x' = theta0^T phi(t, x)` for the
/// default parameters.
pub fn true_theta() -> DMatrix<f64> {
    theta_for(&LorenzParams::default())
}

/// Parameter matrix for arbitrary Lorenz constants.
pub fn theta_for(params: &LorenzParams) -> DMatrix<f64> {
    #[rustfmt::skip]
    let rows = [
        0.0, 0.0, 1.0,
        -params.sigma, params.rho, 0.0,
        params.sigma, -1.0, 0.0,
        0.0, 0.0, -params.beta,
        0.0, 0.0, 1.0,
        0.0, -1.0, 0.0,
    ];
    DMatrix::from_row_slice(FEATURE_DIM, 3, &rows)
}

/// States sampled at `times[i] = (i + 1) h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `n x 3`
    pub states: DMatrix<f64>,
    pub step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Noisy measurements `z_i = xi(i h) + N(0, eta I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    pub values: DMatrix<f64>,
    pub noise_variance: f64,
    pub seed: u64,
    pub stream: u64,
}

/// One classical Runge-Kutta step.
pub fn rk4_step(t: f64, state: &[f64; 3], dt: f64, params: &LorenzParams) -> [f64; 3] {
    let add =
        |a: &[f64; 3], b: &[f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let k1 = lorenz_rhs(t, state, params);
    let k2 = lorenz_rhs(t + 0.5 * dt, &add(state, &k1, 0.5 * dt), params);
    let k3 = lorenz_rhs(t + 0.5 * dt, &add(state, &k2, 0.5 * dt), params);
    let k4 = lorenz_rhs(t + dt, &add(state, &k3, dt), params);
    let mut next = *state;
    for i in 0..3 {
        next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    next
}

/// Integrates from `x0` at `t = 0` and records `n` samples at `h, 2h, ..., nh`,
/// taking `substeps` RK4 steps per sample.
pub fn integrate(
    params: &LorenzParams,
    x0: [f64; 3],
    h: f64,
    n: usize,
    substeps: usize,
) -> Result<Trajectory> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid("h", "must be positive and finite"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    if substeps == 0 {
        return Err(Error::invalid("substeps", "must be at least 1"));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial condition"));
    }
    let dt = h / substeps as f64;
    let mut state = x0;
    let mut states = Vec::with_capacity(3 * n);
    let mut times = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..substeps {
            let t = (i * substeps + j) as f64 * dt;
            state = rk4_step(t, &state, dt, params);
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: i + 1 });
        }
        states.extend_from_slice(&state);
        times.push((i + 1) as f64 * h);
    }
    Ok(Trajectory {
        times,
        states: DMatrix::from_row_slice(n, 3, &states),
        step: h,
    })
}

/// Generator for one noise realization: ChaCha8 keyed by `seed`, on its own
/// `stream` so trials sharing a seed never overlap.
pub fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Adds i.i.d. `N(0, eta)` noise to every coordinate, drawn in row-major order.
pub fn add_noise(traj: &Trajectory, eta: f64, seed: u64, stream: u64) -> Result<MeasurementSeries> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::invalid("eta", "must be non-negative and finite"));
    }
    let mut values = traj.states.clone();
    if eta > 0.0 {
        let sd = libm::sqrt(eta);
        let mut rng = noise_rng(seed, stream);
        let (rows, cols) = values.shape();
        for i in 0..rows {
            for c in 0..cols {
                let e: f64 = rng.sample(StandardNormal);
                values[(i, c)] += sd * e;
            }
        }
    }
    Ok(MeasurementSeries {
        values,
        noise_variance: eta,
        seed,
        stream,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn origin_is_at_rest_at_t0() {
        assert_eq!(
            lorenz_rhs(0.0, &[0.0; 3], &LorenzParams::default()),
            [0.0; 3]
        );
    }

    #[test]
    fn equal_first_coordinates_freeze_x1() {
        for t in [0.0, 0.3, 1.7] {
            assert_eq!(
                lorenz_rhs(t, &[1.0, 1.0, 5.0], &LorenzParams::default())[0],
                0.0
            );
        }
    }

    #[test]
    fn features_at_quarter_period() {
        let phi = feature_map(0.25, &[1.0, 2.0, 3.0], 1.0);
        let expected = [1.0, 1.0, 2.0, 3.0, 2.0, 3.0];
        for (a, b) in phi.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(feature_map(0.0, &[0.0; 3], 1.0), [0.0; 6]);
    }

    #[test]
    fn theta_entries() {
        let theta = true_theta();
        assert_eq!(theta[(1, 0)], -10.0);
        assert_eq!(theta[(1, 1)], 28.0);
        assert_eq!(theta[(3, 2)], -8.0 / 3.0);
        assert_eq!(theta.column(0).iter().filter(|v| **v != 0.0).count(), 2);
        let expected =
            (1.0f64 + 100.0 + 784.0 + 100.0 + 1.0 + (8.0f64 / 3.0).powi(2) + 1.0 + 1.0).sqrt();
        assert_abs_diff_eq!(theta.norm(), expected, epsilon = 1e-12);
    }

    #[test]
    fn rhs_matches_theta_at_initial_condition() {
        let state = [-8.0, 8.0, 27.0];
        let rhs = lorenz_rhs(0.25, &state, &LorenzParams::default());
        let phi = DMatrix::from_row_slice(6, 1, &feature_map(0.25, &state, 1.0));
        let via_theta = true_theta().tr_mul(&phi);
        for i in 0..3 {
            assert_abs_diff_eq!(rhs[i], via_theta[i], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(rhs[0], 160.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_noise_is_identity_and_seeds_are_reproducible() {
        let traj = integrate(&LorenzParams::default(), [-8.0, 8.0, 27.0], 0.001, 50, 2).unwrap();
        let clean = add_noise(&traj, 0.0, 1, 0).unwrap();
        assert_eq!(clean.values, traj.states);
        let a = add_noise(&traj, 0.1, 7, 3).unwrap();
        let b = add_noise(&traj, 0.1, 7, 3).unwrap();
        let c = add_noise(&traj, 0.1, 7, 4).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn integrate_validates_inputs() {
        let p = LorenzParams::default();
        assert!(integrate(&p, [0.0; 3], 0.0, 10, 1).is_err());
        assert!(integrate(&p, [0.0; 3], 0.1, 0, 1).is_err());
        assert!(integrate(&p, [0.0; 3], 0.1, 10, 0).is_err());
        assert!(add_noise(&integrate(&p, [1.0; 3], 0.1, 2, 1).unwrap(), -1.0, 0, 0).is_err());
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        let params = LorenzParams {
            sigma: 10.0,
            rho: 28.0,
            beta: -1e3,
            forcing_freq: 1.0,
        };
        let err = integrate(&params, [1.0, 1.0, 1.0], 0.1, 1000, 1).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }
}
