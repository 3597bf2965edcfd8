//! Sample-split filters and design-matrix assembly.
//!
//! Every regression time sits halfway between two adjacent samples. Within
//! each window the regressors `X` and responses `Y` are filtered from the
//! samples at even positions only and the instruments `Z` from the samples at
//! odd positions only, with both sets of filters on a doubled step and
//! targeting the same instant. Noise in a row of `Z` is therefore independent
//! of noise in the same row of `X` and `Y`.
//!
//! Sample `i` (1-based) of a series is taken at time `i * h`. Positions are
//! counted from the start of each window, so for windows at even offsets they
//! coincide with the global sample parity.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::polyfilter::{build_filter, FilterSpec, FilterWeights};
use crate::{Error, Result};

/// Continuous-time (derivative response) or discrete-time (one-step shift
/// response) model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mode {
    Continuous,
    Discrete,
}

impl Mode {
    /// The operator applied to the signal to form the response.
    pub fn response_operator(self) -> OperatorKind {
        match self {
            Mode::Continuous => OperatorKind::Derivative(1),
            Mode::Discrete => OperatorKind::Shift(1),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Continuous => "continuous",
            Mode::Discrete => "discrete",
        }
    }
}

impl core::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(Mode::Continuous),
            "discrete" => Ok(Mode::Discrete),
            other => Err(Error::invalid(
                "mode",
                alloc::format!("expected `continuous` or `discrete`, got `{other}`"),
            )),
        }
    }
}

/// Linear operator on the sampled signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// Left shift by `order` base sampling steps.
    Shift(usize),
    /// Time derivative of the given order.
    Derivative(usize),
}

/// The hat filters (even positions) and the tilde filter (odd positions).
#[derive(Debug, Clone)]
pub struct SplitFilterBank {
    /// Response filter on the even positions.
    pub hat_h: FilterWeights,
    /// State filter on the even positions.
    pub hat_g: FilterWeights,
    /// State filter on the odd positions.
    pub tilde_g: FilterWeights,
    pub mode: Mode,
    /// Window span `N` in base samples; each filter has `N / 2` taps.
    pub base_window: usize,
    /// Base sampling step `h`.
    pub base_step: f64,
}

/// Builds the split filters for a window spanning `span` base samples.
pub fn build_split_bank(mode: Mode, span: usize, h: f64, p: usize) -> Result<SplitFilterBank> {
    if span == 0 || span % 2 != 0 {
        return Err(Error::invalid(
            "window",
            alloc::format!("span {span} must be a positive even number"),
        ));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid("step", "must be positive and finite"));
    }
    let taps = span / 2;
    let step = 2.0 * h;
    let center = (1.0 + taps as f64) / 2.0;

    let hat_g = build_filter(&FilterSpec::new(taps, step, center - 0.25, 0, p))?;
    let tilde_g = build_filter(&FilterSpec::new(taps, step, center + 0.25, 0, p))?;
    let hat_h = match mode {
        Mode::Continuous => build_filter(&FilterSpec::new(taps, step, center - 0.25, 1, p))?,
        // One base step later is half a step on the doubled grid.
        Mode::Discrete => build_filter(&FilterSpec::new(taps, step, center + 0.25, 0, p))?,
    };

    Ok(SplitFilterBank {
        hat_h,
        hat_g,
        tilde_g,
        mode,
        base_window: span,
        base_step: h,
    })
}

impl SplitFilterBank {
    /// Taps per filter.
    pub fn taps(&self) -> usize {
        self.base_window / 2
    }

    /// Regression time of the window whose first sample has 0-based index `offset`.
    pub fn regression_time(&self, offset: usize) -> f64 {
        (offset as f64 + (1.0 + self.base_window as f64) / 2.0) * self.base_step
    }

    /// Number of windows placed in `samples` samples at the given stride.
    pub fn window_count(&self, samples: usize, stride: usize) -> usize {
        if samples < self.base_window || stride == 0 {
            0
        } else {
            (samples - self.base_window) / stride + 1
        }
    }
}

/// Static nonlinearity `phi(t, state)` producing the regressors.
pub trait FeatureMap: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, state: &[f64], out: &mut [f64]);
}

/// `phi(t, x) = x`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityFeatures(pub usize);

impl FeatureMap for IdentityFeatures {
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, _t: f64, state: &[f64], out: &mut [f64]) {
        out.copy_from_slice(state);
    }
}

/// Stacked regressors, responses and instruments.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    /// `n' x d_phi` features of the even-sample state estimate.
    pub x: DMatrix<f64>,
    /// `n' x d_H` even-sample response estimate.
    pub y: DMatrix<f64>,
    /// `n' x d_phi` truncated features of the odd-sample state estimate.
    pub z: DMatrix<f64>,
    pub times: Vec<f64>,
    /// Base samples spanned by one window; rows further apart than this share
    /// no samples.
    pub window_span: usize,
}

impl DesignMatrices {
    /// Builds a design from explicit matrices, checking shapes.
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self> {
        let rows = x.nrows();
        for (what, m) in [("response rows", &y), ("instrument rows", &z)] {
            if m.nrows() != rows {
                return Err(Error::Dimension {
                    what,
                    expected: rows,
                    found: m.nrows(),
                });
            }
        }
        if z.ncols() != x.ncols() {
            return Err(Error::Dimension {
                what: "instrument columns",
                expected: x.ncols(),
                found: z.ncols(),
            });
        }
        let times = (0..rows).map(|j| j as f64).collect();
        Ok(DesignMatrices {
            x,
            y,
            z,
            times,
            window_span: 1,
        })
    }

    /// Number of regression times `n'`.
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }
}

/// `x / (1 + |x| / mu)`: shrinks `x` radially into the open ball of radius `mu`.
pub fn rho_truncate(x: &[f64], mu: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    rho_truncate_in_place(&mut out, mu);
    out
}

pub fn rho_truncate_in_place(x: &mut [f64], mu: f64) {
    let norm = libm::sqrt(x.iter().map(|v| v * v).sum());
    if norm == 0.0 {
        return;
    }
    let mut scale = 1.0 / (1.0 + norm / mu);
    // Rounding can land exactly on the boundary for |x| >> mu.
    if !(norm * scale < mu) {
        scale = (mu / norm) * (1.0 - f64::EPSILON);
    }
    for v in x.iter_mut() {
        *v *= scale;
    }
}

/// Filters `measurements` (`n x d_y`, row `i` sampled at `(i + 1) h`) into a
/// design with windows at offsets `0, stride, 2 stride, ...`.
pub fn assemble_design<F: FeatureMap + ?Sized>(
    measurements: &DMatrix<f64>,
    bank: &SplitFilterBank,
    features: &F,
    mu: f64,
    stride: usize,
) -> Result<DesignMatrices> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::invalid("mu", "must be positive and finite"));
    }
    if stride == 0 {
        return Err(Error::invalid("stride", "must be at least 1"));
    }
    let samples = measurements.nrows();
    let dy = measurements.ncols();
    let span = bank.base_window;
    if samples < span {
        return Err(Error::EmptyDesign {
            samples,
            required: span,
        });
    }
    let taps = bank.taps();
    let count = bank.window_count(samples, stride);
    let dphi = features.dim();

    // Samples with even 1-based index are the 0-based odd rows and vice versa.
    let split: Vec<(Vec<f64>, Vec<f64>)> = (0..dy)
        .map(|c| {
            let column = measurements.column(c);
            let even = column.iter().skip(1).step_by(2).copied().collect();
            let odd = column.iter().step_by(2).copied().collect();
            (even, odd)
        })
        .collect();

    let hat_g = bank.hat_g.stencil();
    let tilde_g = bank.tilde_g.stencil();
    let hat_h = bank.hat_h.stencil();

    let mut x = Vec::with_capacity(count * dphi);
    let mut y = Vec::with_capacity(count * dy);
    let mut z = Vec::with_capacity(count * dphi);
    let mut times = Vec::with_capacity(count);

    let mut g_hat = alloc::vec![0.0; dy];
    let mut g_tilde = alloc::vec![0.0; dy];
    let mut row = alloc::vec![0.0; dphi];

    for j in 0..count {
        let offset = j * stride;
        let t = bank.regression_time(offset);
        for (c, (even, odd)) in split.iter().enumerate() {
            // Window positions 2, 4, ... fall on globally even samples only
            // when the window starts at an even offset.
            let (hat, tilde) = if offset % 2 == 0 {
                (
                    &even[offset / 2..offset / 2 + taps],
                    &odd[offset / 2..offset / 2 + taps],
                )
            } else {
                let (o, e) = (offset.div_ceil(2), (offset - 1) / 2);
                (&odd[o..o + taps], &even[e..e + taps])
            };
            y.push(dot(&hat_h, hat));
            g_hat[c] = dot(&hat_g, hat);
            g_tilde[c] = dot(&tilde_g, tilde);
        }
        features.eval(t, &g_hat, &mut row);
        x.extend_from_slice(&row);
        features.eval(t, &g_tilde, &mut row);
        rho_truncate_in_place(&mut row, mu);
        z.extend_from_slice(&row);
        times.push(t);
    }

    Ok(DesignMatrices {
        x: DMatrix::from_row_slice(count, dphi, &x),
        y: DMatrix::from_row_slice(count, dy, &y),
        z: DMatrix::from_row_slice(count, dphi, &z),
        times,
        window_span: span,
    })
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let wc = w.chunks_exact(4);
    let xc = x.chunks_exact(4);
    let tail: f64 = wc
        .remainder()
        .iter()
        .zip(xc.remainder())
        .map(|(a, b)| a * b)
        .sum();
    for (a, b) in wc.zip(xc) {
        acc[0] += a[0] * b[0];
        acc[1] += a[1] * b[1];
        acc[2] += a[2] * b[2];
        acc[3] += a[3] * b[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
