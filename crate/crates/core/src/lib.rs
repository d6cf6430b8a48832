//! Geometry-to-noise toolkit for 1/f flux noise in rectangular SQUID loops.
//!
//! The pipeline runs from loop geometry ([`geometry`]) through the static
//! current distribution of each arm's cross-section ([`strip`]) and the
//! magnetic field on the surrounding interfaces ([`field`]) to a flux
//! variance and noise amplitude for a surface-spin defect model ([`noise`]).
//! [`dephasing`] covers the spin-echo side: filter function, Gaussian
//! dephasing rates and the extraction of √A_Φ from spectroscopy data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod convergence;
pub mod dataset;
pub mod dephasing;
pub mod error;
pub mod field;
pub mod geometry;
pub mod inductance;
pub mod lsq;
pub mod noise;
pub mod quadrature;
pub mod strip;

pub use error::{Error, ErrorClass, Result};
pub use geometry::{ArmSegment, FilmParams, SquidGeometry};
