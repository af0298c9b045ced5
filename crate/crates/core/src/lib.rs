//! Band functions of the axisymmetric magnetic operator family and of the
//! de Gennes operators, with derivative formulas, minima and criteria.

// `!(x > 0.0)` is used on purpose to reject NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bandfuncs;
pub mod eigensolve;
pub mod error;
pub mod hermite;
pub mod operators;
pub mod verify;

pub use error::{Error, Result};
