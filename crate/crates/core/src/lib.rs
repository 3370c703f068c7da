//! Unified power control (UPC) for CDMA uplinks with multiuser detectors.
//!
//! The crate is `no_std` and only needs an allocator. It covers:
//!
//! * [`scenario`]: system configuration, path-loss gains and SNR bookkeeping.
//! * [`efficiency`]: large-system multiuser efficiency for the matched filter,
//!   decorrelator, linear MMSE and individually optimal detectors.
//! * [`upc`]: the power control iteration and a checker for the standard
//!   interference function properties.
//! * [`finite`]: finite-size ground truth with random binary spreading, exact
//!   output SIRs and the SIR-driven baseline update.
//! * [`analysis`]: SIR deviation statistics, Monte Carlo estimators and the
//!   summary table comparing simulation with the closed-form approximations.
//!
//! Everything works in linear scale; dB only appears at I/O boundaries.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod efficiency;
mod error;
pub mod finite;
mod linalg;
pub mod quadrature;
pub mod scenario;
pub mod solver;
pub mod special;
pub mod upc;

pub use error::{Error, Result};
pub use scenario::{PowerVector, ReceiverKind, Scenario, SnrProfile};

/// Converts a linear power ratio to decibels.
pub fn to_db(linear: f64) -> f64 {
    10.0 * libm::log10(linear)
}

/// Converts decibels to a linear power ratio.
pub fn from_db(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}
