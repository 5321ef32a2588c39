//! Correlation functions of characteristic polynomials of non-Hermitian
//! random matrices with tunable second moment `kappa20 = E x^2`.
//!
//! The crate samples the ensemble, estimates `f_m(Z) = E prod_j
//! |det(M_n - z_j)|^2` by Monte Carlo, evaluates the large-n predictions and
//! certifies the analytic ingredients behind them (saddle-point landscape,
//! Pfaffian structure, the unitary-group integral).

// `!(x > 0.0)` is used deliberately so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod hciz;
pub mod landscape;
pub mod matalg;
pub mod matrix;
pub mod mcengine;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
pub use matalg::LogComplex;
pub use matrix::ComplexMatrix;
pub use num_complex::Complex64;
pub use rng::RngStream;
