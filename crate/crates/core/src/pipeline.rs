//! End-to-end glue: simulate, filter, estimate.

use nalgebra::DMatrix;

use crate::dynamics::{integrate, theta_for, LorenzFeatures, LorenzParams, Trajectory};
use crate::estimator::{
    excitation_check, iv_estimate, ls_estimate, Estimate, Excitation, IvConfig,
};
use crate::splitfilters::{assemble_design, build_split_bank, Mode, SplitFilterBank};
use crate::{Error, Result};

/// Exactness degree used when the requested one cannot be built.
pub const FALLBACK_EXACTNESS: usize = 8;

/// Everything that determines the noiseless part of an experiment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PipelineConfig {
    pub mode: Mode,
    /// Number of samples.
    pub n: usize,
    /// Sampling step.
    pub h: f64,
    /// Window span in base samples (even); each split filter has `window / 2` taps.
    pub window: usize,
    /// Filter exactness degree.
    pub p: usize,
    pub lambda: f64,
    pub mu: f64,
    /// Offset between consecutive windows, in samples.
    pub stride: usize,
    /// Integrator steps per sample.
    pub substeps: usize,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub lorenz: LorenzParams,
    pub x0: [f64; 3],
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::Continuous,
            n: 100_000,
            h: 1e-3,
            window: 200,
            p: 75,
            lambda: 1.0,
            mu: 200.0,
            stride: 1,
            substeps: 10,
            lorenz: LorenzParams::default(),
            x0: [-8.0, 8.0, 27.0],
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "must be positive"));
        }
        if self.window == 0 || self.window % 2 != 0 {
            return Err(Error::invalid("window", "must be a positive even number"));
        }
        if self.n < self.window {
            return Err(Error::EmptyDesign {
                samples: self.n,
                required: self.window,
            });
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride", "must be at least 1"));
        }
        if self.substeps == 0 {
            return Err(Error::invalid("substeps", "must be at least 1"));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::invalid("mu", "must be positive and finite"));
        }
        self.iv_config().validate()
    }

    pub fn iv_config(&self) -> IvConfig {
        IvConfig {
            lambda: self.lambda,
            mu: self.mu,
        }
    }

    pub fn features(&self) -> LorenzFeatures {
        LorenzFeatures {
            forcing_freq: self.lorenz.forcing_freq,
        }
    }

    pub fn simulate(&self) -> Result<Trajectory> {
        integrate(&self.lorenz, self.x0, self.h, self.n, self.substeps)
    }

    pub fn build_bank(&self) -> Result<SplitFilterBank> {
        build_split_bank(self.mode, self.window, self.h, self.p)
    }

    /// Builds the bank at `p`, or at [`FALLBACK_EXACTNESS`] if `p` is
    /// infeasible or ill-conditioned. The error that forced the fallback is
    /// returned alongside.
    pub fn build_bank_with_fallback(&self) -> Result<(SplitFilterBank, Option<Error>)> {
        match self.build_bank() {
            Ok(bank) => Ok((bank, None)),
            Err(e @ (Error::Conditioning { .. } | Error::RankDeficient { .. }))
                if self.p != FALLBACK_EXACTNESS =>
            {
                let bank = build_split_bank(self.mode, self.window, self.h, FALLBACK_EXACTNESS)?;
                Ok((bank, Some(e)))
            }
            Err(e) => Err(e),
        }
    }
}

/// Both estimators on one data set.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub iv: Estimate,
    pub ls: Estimate,
    pub excitation: Excitation,
    /// Number of regression times.
    pub rows: usize,
}

pub fn estimate_both(
    measurements: &DMatrix<f64>,
    bank: &SplitFilterBank,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    let design = assemble_design(
        measurements,
        bank,
        &config.features(),
        config.mu,
        config.stride,
    )?;
    let iv_config = config.iv_config();
    Ok(PipelineOutput {
        iv: iv_estimate(&design, &iv_config)?,
        ls: ls_estimate(&design)?,
        excitation: excitation_check(&design, iv_config.lambda)?,
        rows: design.rows(),
    })
}

/// Where the reference parameter of an experiment comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ReferenceKind {
    /// The Lorenz parameter matrix itself.
    GroundTruth,
    /// Least squares on the noiseless samples.
    PseudoTrue,
}

/// Least squares on noiseless data through the same filters: the reference
/// for the discrete-time model, which has no exact parameter.
pub fn pseudo_true_discrete(config: &PipelineConfig) -> Result<DMatrix<f64>> {
    let traj = config.simulate()?;
    let (bank, _) = config.build_bank_with_fallback()?;
    pseudo_true_from(&traj, &bank, config)
}

/// [`pseudo_true_discrete`] reusing an already simulated trajectory and bank.
pub fn pseudo_true_from(
    traj: &Trajectory,
    bank: &SplitFilterBank,
    config: &PipelineConfig,
) -> Result<DMatrix<f64>> {
    if bank.mode != Mode::Discrete {
        return Err(Error::invalid(
            "mode",
            "pseudo-true reference needs the discrete model",
        ));
    }
    let design = assemble_design(
        &traj.states,
        bank,
        &config.features(),
        config.mu,
        config.stride,
    )?;
    Ok(ls_estimate(&design)?.theta)
}

/// Reference parameter for `config`'s mode.
pub fn reference_theta(
    traj: &Trajectory,
    bank: &SplitFilterBank,
    config: &PipelineConfig,
) -> Result<(DMatrix<f64>, ReferenceKind)> {
    match bank.mode {
        Mode::Continuous => Ok((theta_for(&config.lorenz), ReferenceKind::GroundTruth)),
        Mode::Discrete => Ok((
            pseudo_true_from(traj, bank, config)?,
            ReferenceKind::PseudoTrue,
        )),
    }
}

/// First-order discretization `x(t + h) ~ x + h theta0^T phi`: identity on the
/// linear state features plus `h theta0`.
pub fn euler_theta(params: &LorenzParams, h: f64) -> DMatrix<f64> {
    let mut theta = theta_for(params) * h;
    for c in 0..3 {
        theta[(c + 1, c)] += 1.0;
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let base = PipelineConfig::default();
        for c in [
            PipelineConfig {
                window: 99,
                ..base.clone()
            },
            PipelineConfig {
                stride: 0,
                ..base.clone()
            },
            PipelineConfig {
                lambda: 0.0,
                ..base.clone()
            },
            PipelineConfig {
                mu: f64::INFINITY,
                ..base.clone()
            },
            PipelineConfig {
                n: 10,
                ..base.clone()
            },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn fallback_kicks_in_for_infeasible_order() {
        let config = PipelineConfig {
            window: 100,
            p: 75,
            ..PipelineConfig::default()
        };
        let (bank, cause) = config.build_bank_with_fallback().unwrap();
        assert_eq!(bank.hat_g.spec().exactness, FALLBACK_EXACTNESS);
        assert!(matches!(
            cause,
            Some(Error::RankDeficient {
                rank: 50,
                required: 75
            })
        ));
    }

    #[test]
    fn pseudo_true_requires_discrete_mode() {
        let config = PipelineConfig {
            n: 400,
            window: 40,
            p: 6,
            ..PipelineConfig::default()
        };
        assert!(matches!(
            pseudo_true_discrete(&config),
            Err(Error::InvalidParameter { name: "mode", .. })
        ));
    }
}
