//! Numerical laboratory for pre- and post-selected quantum measurements.
//!
//! The crate is organised bottom-up:
//!
//! - [`hilbert`]: small complex Hilbert spaces, spin states, Hermitian
//!   observables and their spectral decomposition.
//! - [`pointer`]: discretised one-dimensional pointer wavefunctions with
//!   position and momentum representations.
//! - [`protocol`]: weak coupling, postselection, ABL probabilities, weak
//!   values and projective measurements.
//! - [`aav`]: the spin-1/2 Stern-Gerlach amplification scenario with exact,
//!   Monte Carlo, sweep and shift-decomposition analyses.
//! - [`flowlines`]: weak-momentum flow lines of a scalar two-slit beam.
//! - [`cli`]: the `weakmeas` command-line front end.

// `!(x > 0.0)` is used deliberately so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aav;
pub mod cli;
pub mod error;
pub mod flowlines;
pub mod hilbert;
pub mod pointer;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64;
