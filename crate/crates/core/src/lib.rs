// SPDX-License-Identifier: Apache-2.0

//! Numerical core for derivatives of local time of the two-parameter Gaussian
//! field `Z(t, s) = X_t - X̃_s`, where `X` and `X̃` are independent
//! bifractional or subfractional Brownian motions.
//!
//! The crate is `no_std` (with `alloc`). Everything here is a pure function
//! of its inputs; parallel drivers, file formats and the command line live in
//! the `dlt` companion crate.
//!
//! Module map:
//!
//! - [`covariance`]: kernels, Gram matrices, local nondeterminism certificates.
//! - [`pathgen`]: exact Cholesky sampling of component paths.
//! - [`kernel`]: Gaussian mollifier and its derivatives via Hermite polynomials.
//! - [`localtime`]: Riemann-sum estimator of the mollified local time derivative.
//! - [`moments`]: exact second moment by Wick reduction and graded quadrature.
//! - [`rates`]: regime classification and rate regressions.
//! - [`lemmas`]: numerical certification of the supporting inequalities.
#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

pub mod covariance;
pub mod error;
pub mod kernel;
pub mod lemmas;
pub mod localtime;
pub mod moments;
pub mod pathgen;
pub mod quadrature;
pub mod rates;

pub use covariance::{CovarianceModel, FieldSpec, ModelKind};
pub use error::{Error, Result};
pub use kernel::MultiIndex;
pub use localtime::LocalTimeEstimate;
pub use moments::{MomentResult, TimeRect};
pub use pathgen::{PathSample, TimeGrid};
pub use quadrature::QuadConfig;
pub use rates::{RateDescriptor, Regime};
