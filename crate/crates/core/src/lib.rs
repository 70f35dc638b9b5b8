//! Stochastic homogenization of 3D anisotropic elastic media whose elasticity is a
//! non-Gaussian positive-definite matrix-valued random field with an uncertain
//! spectral measure.
//!
//! The pipeline is split into:
//!
//! * [`spectral`]: discretized dimensionless spectrum, its random parameterization
//!   and the law of the spectrum parameters.
//! * [`gfield`]: amplitude/phase germs and the truncated spectral representation of
//!   the normalized Gaussian field, plus its closed-form correlation.
//! * [`maxent`]: the Gamma transform, the upper-triangular matrix field and its
//!   normalization around the mean elasticity.
//! * [`fem`]: trilinear hexahedral corrector problems on the unit cube and the
//!   effective elasticity matrix.
//! * [`mc`]: the Monte Carlo driver and its statistics.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod fem;
pub mod gfield;
pub mod maxent;
pub mod mc;
pub mod rng;
pub mod spectral;
pub mod voigt;

pub use error::{Error, Result};

pub use nalgebra::{Matrix6, Vector6};
