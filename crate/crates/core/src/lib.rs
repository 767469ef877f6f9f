//! Reflection of a weak probe from a strongly pumped multilevel artificial
//! atom at the end of a semi-infinite waveguide.
//!
//! The pipeline is: [`model`] builds the transmon ladder in the pump frame,
//! [`lindblad`] turns it into a master-equation generator and finds the
//! stationary state, [`response`] computes the linear susceptibility of that
//! state to a probe and the reflection coefficient `r = 1 + Γ₁χ`, and
//! [`sweep`] runs parameter grids. [`oracle`] is an independent time-domain
//! two-tone simulation used to validate [`response`].

// `!(x > y)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod lindblad;
pub mod model;
pub mod oracle;
pub mod response;
pub mod sweep;

pub use error::{Error, Result};
pub use model::DeviceParams;
