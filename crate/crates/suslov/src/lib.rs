//! Structure-preserving numerical integration for the Suslov problem: a
//! rigid body about its center of mass with the third body-frame component
//! of the angular velocity constrained to zero.
//!
//! The crate provides the continuous reduced dynamics and its Lagrange
//! multiplier, two implicit one-step discretizations (midpoint and
//! variational) built on the Cayley retraction, attitude reconstruction on
//! SO(3), a one-step consistency-order lab, and the configuration/CSV
//! plumbing behind the `suslov` command-line tool.

// Numeric guards here are written in the negated form `!(a > b)` on
// purpose: unlike `a <= b`, the negated comparison is true when either
// side is NaN, so validation fails closed on non-finite input.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cayley;
pub mod config;
pub mod consistency;
pub mod dreps;
pub mod dynamics;
pub mod error;
pub mod sim;
pub mod so3;
pub mod trajectory;

pub use error::{Error, Result};
