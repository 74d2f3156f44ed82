//! Variable-step BDF schemes of orders 1 to 8 and their composed flows.
//!
//! A composed step runs two BDF sub-steps with complex fractions `α₁τ` and
//! `(1 − α₁)τ`. The real part of the result gains one order of accuracy and
//! the imaginary part is a local error estimate.

pub mod adaptivity;
pub mod bdf;
pub mod composition;
mod error;
pub mod experiments;
pub mod output;
pub mod par;
pub mod polyroot;
pub mod problems;
pub mod stability;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub type C64 = Complex64;
