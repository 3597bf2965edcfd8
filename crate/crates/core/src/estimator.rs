//! Clipped instrumental-variables estimator and the least-squares baseline.

use nalgebra::DMatrix;

use crate::splitfilters::DesignMatrices;
use crate::{Error, Result};

/// Hyperparameters of the IV estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IvConfig {
    /// Singular-value floor `lambda` applied to `Z^T X`.
    pub lambda: f64,
    /// Instrument truncation level `mu`. Only recorded here; the truncation
    /// happens while assembling the design.
    pub mu: f64,
}

impl IvConfig {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        let config = IvConfig { lambda, mu };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid("lambda", "must be positive and finite"));
        }
        if !(self.mu > 0.0) {
            return Err(Error::invalid("mu", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Iv,
    Ls,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Iv => "iv",
            Method::Ls => "ls",
        }
    }
}

/// Estimated parameter matrix with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// `d_phi x d_H`
    pub theta: DMatrix<f64>,
    /// Smallest singular value of the matrix being inverted before any
    /// clipping: `Z^T X` for IV, `X^T X` for LS.
    pub sigma_min_zx: f64,
    /// Singular values raised to the floor.
    pub clipped_directions: usize,
    /// Ratio of extreme singular values of the inverted matrix (after clipping).
    pub condition: f64,
    pub method: Method,
}

/// Replaces every singular value `s` of `a` by `max(lambda, s)`.
pub fn clip_singular_values(a: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid("lambda", "must be positive and finite"));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix to clip"));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut scaled = u.clone();
    for (j, s) in svd.singular_values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(s.max(lambda));
    }
    Ok(scaled * v_t)
}

/// `theta = clip_lambda(Z^T X)^{-1} Z^T Y`.
pub fn iv_estimate(design: &DesignMatrices, config: &IvConfig) -> Result<Estimate> {
    config.validate()?;
    check_shapes(design)?;
    let zx = design.z.tr_mul(&design.x);
    let zy = design.z.tr_mul(&design.y);
    if zx.iter().chain(zy.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("instrument products"));
    }
    let svd = zx.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sigma = &svd.singular_values;
    let sigma_min = sigma.iter().fold(f64::INFINITY, |acc, &s| acc.min(s));
    let clipped_directions = sigma.iter().filter(|&&s| s < config.lambda).count();

    // V diag(1 / max(lambda, s)) U^T Z^T Y
    let mut projected = u.tr_mul(&zy);
    for (i, s) in sigma.iter().enumerate() {
        projected.row_mut(i).unscale_mut(s.max(config.lambda));
    }
    let theta = v_t.tr_mul(&projected);

    let floor_max = sigma.iter().fold(config.lambda, |acc, &s| acc.max(s));
    let floor_min = sigma_min.max(config.lambda);
    Ok(Estimate {
        theta,
        sigma_min_zx: sigma_min,
        clipped_directions,
        condition: floor_max / floor_min,
        method: Method::Iv,
    })
}

/// Ordinary least squares through a QR factorization of `X`.
pub fn ls_estimate(design: &DesignMatrices) -> Result<Estimate> {
    check_shapes(design)?;
    let x = &design.x;
    let cols = x.ncols();
    if x.nrows() < cols {
        return Err(Error::Singular { sigma_min: 0.0 });
    }
    if x.iter().chain(design.y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design"));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    // Singular values of R are those of X.
    let sv = r.clone().svd(false, false).singular_values;
    let s_max = sv.iter().fold(0.0f64, |acc, &s| acc.max(s));
    let s_min = sv.iter().fold(f64::INFINITY, |acc, &s| acc.min(s));
    if !(s_min > s_max * f64::EPSILON * x.nrows() as f64) {
        return Err(Error::Singular { sigma_min: s_min });
    }
    let qty = qr.q().tr_mul(&design.y);
    let theta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::Singular { sigma_min: s_min })?;
    Ok(Estimate {
        theta,
        sigma_min_zx: s_min * s_min,
        clipped_directions: 0,
        condition: (s_max / s_min) * (s_max / s_min),
        method: Method::Ls,
    })
}

/// Plug-in persistence-of-excitation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Excitation {
    /// `sigma_min(Z^T X)`
    pub sigma_min: f64,
    /// `sigma_min > lambda`
    pub satisfied: bool,
    /// `sigma_min - lambda`
    pub margin: f64,
}

pub fn excitation_check(design: &DesignMatrices, lambda: f64) -> Result<Excitation> {
    check_shapes(design)?;
    let sigma_min = design
        .z
        .tr_mul(&design.x)
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |acc, &s| acc.min(s));
    Ok(Excitation {
        sigma_min,
        satisfied: sigma_min > lambda,
        margin: sigma_min - lambda,
    })
}

fn check_shapes(design: &DesignMatrices) -> Result<()> {
    let rows = design.x.nrows();
    if rows == 0 {
        return Err(Error::InsufficientData {
            needed: 1,
            found: 0,
        });
    }
    for (what, m) in [("response rows", &design.y), ("instrument rows", &design.z)] {
        if m.nrows() != rows {
            return Err(Error::Dimension {
                what,
                expected: rows,
                found: m.nrows(),
            });
        }
    }
    if design.z.ncols() != design.x.ncols() {
        return Err(Error::Dimension {
            what: "instrument columns",
            expected: design.x.ncols(),
            found: design.z.ncols(),
        });
    }
    Ok(())
}
