//! Guaranteed functional a posteriori error bounds for the spectral
//! fractional Laplacian on (0, 1), computed through its extension to the
//! half-cylinder Q = (0,1) x (0, inf).
//!
//! All fields are kept in a separable exponential form, so every weighted
//! norm, majorant, and minorant is evaluated in closed form. The
//! [`quadrature`] module provides an independent brute-force check of those
//! closed forms.

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constants;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod fields;
pub mod quadrature;
pub mod series;
pub mod verify;

pub use constants::{DomainSpec, FractionalOrder};
pub use error::{Error, Result};
pub use fields::{SeparableField, SeparableFlux};
pub use series::{CosSeries, SinSeries, XSeries};
