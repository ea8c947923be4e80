//! Numerical toolkit for one-phase free boundary problems arising as limits of
//! singularly perturbed semilinear energies.

// Negated comparisons are used on purpose: `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cases;
pub mod error;
pub mod fbcheck;
pub mod field;
pub mod interface;
pub mod io;
pub mod ode1d;
pub mod phase;
pub mod potentials;
pub mod solver;
pub mod variations;

pub use error::{Error, Result};
