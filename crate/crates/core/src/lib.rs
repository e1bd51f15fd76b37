//! Sketch-and-project iterative solvers and the spectral machinery that
//! predicts their convergence rate.
//!
//! The crate is organized by subsystem:
//!
//! - [`matgen`]: test matrices with prescribed spectra, LIBSVM parsing and
//!   linear systems with known solutions.
//! - [`sketch`]: Gaussian, Rademacher, LESS and row-sampling sketches,
//!   leverage scores and Hadamard preconditioning.
//! - [`solver`]: the sketch-and-project iteration and empirical rates.
//! - [`randsvd`]: Randomized SVD and its expected Frobenius error `Err(A, k)`.
//! - [`spectral`]: the expected projection `E[P]`, its surrogate and rate bounds.
//! - [`newton`]: Randomized Subspace Newton and its rate certificate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod matgen;
pub mod newton;
pub mod randsvd;
pub mod rng;
pub mod sketch;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, Vector};
pub use matgen::{LinearSystem, SpectralProfile};
pub use randsvd::{ErrEstimate, LowRankFactorization};
pub use sketch::{Sketch, SketchFamily, SketchSpec, SparseSketch};
pub use solver::{IterLog, RateReport, SolverConfig};
pub use spectral::{ProjectionEstimate, RateBoundSet, SurrogateComparison};
