//! Instrumental-variables identification of linear-in-parameters dynamics
//! from noisy, uniformly sampled measurements.
//!
//! The instruments are synthesized from the data itself: every signal is
//! evaluated twice at the same off-grid instant, once from the even-indexed
//! samples and once from the odd-indexed samples, with minimum-norm local
//! polynomial filters. The odd-sample copy is independent of the noise in the
//! regressors and responses and serves as the instrument.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. File formats, the Monte Carlo driver and the command line live in
//! the `splitiv` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]
// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub use error::*;

pub mod bounds;
pub mod dynamics;
pub mod estimator;
pub mod pipeline;
pub mod polyfilter;
pub mod splitfilters;
pub mod stats;

pub use nalgebra::DMatrix;
