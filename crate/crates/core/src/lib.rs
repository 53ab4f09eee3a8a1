//! Samplers, kernels and dynamics for Gaussian free fields.
//!
//! The crate is organised around a handful of constructive objects:
//!
//! * [`domain`] — geometry, lattices, Laplacian eigenbases and Green
//!   functions (classical and fractional) that define every covariance
//!   used elsewhere.
//! * [`kernels`] — Poisson kernel, fractional Poisson kernel and the
//!   α-mean kernel, together with their normalization constants.
//! * [`fields`] — samplers for the GFF, fractional fields and
//!   zero-boundary ball fields, plus test functions and the pairing
//!   `(h, f)`.
//! * [`operators`] — the ball-averaged approximate Laplacian `Δ_ε`, its
//!   fractional analogue, the Riesz fractional Laplacian and constant
//!   calibration.
//! * [`dynamics`] — the Poissonian ball-resampling Markov jump process
//!   and its martingale / quadratic-variation observables.
//! * [`she`] — exact Ornstein–Uhlenbeck spectral solvers for the
//!   (fractional) additive stochastic heat equation.
//! * [`stats`] — two-sample tests, moment reports, boundary-decay checks
//!   and trend fits used to turn simulations into verdicts.

pub mod domain;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod io;
pub mod kernels;
pub mod operators;
pub mod quad;
pub mod she;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
