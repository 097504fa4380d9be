//! Simulation and analysis of superadiabatic STIRAP in a driven three-level
//! ladder (qutrit).
//!
//! All frequencies and rates are angular and stored in rad/ns with ħ = 1, so
//! energies and rates share units. Times are in ns and phases in rad. The
//! [`units`] module converts from the MHz values quoted for such experiments,
//! where a coupling "Ω/(2π) = x MHz" becomes Ω = 2π·x·10⁻³ rad/ns.

// `!(x > 0.0)` is used deliberately so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adiabatic;
pub mod config;
pub mod dynamics;
pub mod gauge;
pub mod integrate;
pub mod model;
pub mod pulses;
pub mod quad;
pub mod sweep;
pub mod tomography;
pub mod units;
pub mod waveform;

mod error;

pub use error::{Error, Result};
pub use model::{DecoherenceRates, HamiltonianMatrix, QutritState};
