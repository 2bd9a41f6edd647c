//! Classical and quantum recurrences of matter waves in a periodically
//! driven (phase-modulated) optical lattice.
//!
//! The crate is organised bottom-up:
//!
//! * [`units`] converts laboratory parameters into the dimensionless set
//!   (k̄, V′, q₀, λ, G) used everywhere else.
//! * [`mathieu`] computes Mathieu characteristic values of real order and the
//!   band structure of the cosine lattice.
//! * [`resonance`] assembles per-resonance quantities and evaluates the
//!   closed-form classical period, revival and super-revival times.
//! * [`classical`] integrates the driven pendulum and samples stroboscopic
//!   Poincaré sections.
//! * [`quantum`] propagates the condensate wavefunction with a split-operator
//!   scheme in the vector-potential gauge.
//! * [`analysis`] extracts recurrence times from autocorrelation series and
//!   runs parameter sweeps.
//! * [`config`], [`output`] and [`recipes`] back the command-line tool.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod classical;
pub mod config;
pub mod error;
pub mod mathieu;
pub mod output;
pub mod quadrature;
pub mod quantum;
pub mod recipes;
pub mod resonance;
pub mod units;

pub use error::{Error, Result};
