//! Simulation engine for recursive nuclear-spin pumping at nitrogen-vacancy
//! centers in diamond.
//!
//! The crate models the nine-level ground-state manifold of the NV electron
//! spin (mS = +1, 0, -1) coupled to its intrinsic N-14 nuclear spin
//! (mI = +1, 0, -1) and provides:
//!
//! - a density-matrix engine with ideal and finite-selectivity microwave/rf
//!   pulses and a populations-only optical pumping channel ([`spin`]),
//! - builders and a runner for the spin-exchange and population-trapping
//!   pulse protocols ([`protocol`]),
//! - the closed-form two-state pumping recursion with a Monte-Carlo
//!   cross-check ([`toy`]),
//! - synthetic ESR and Ramsey-FFT readout with population estimation
//!   ([`readout`]),
//! - a small text language for pulse programs ([`seqlang`]).
//!
//! All frequencies are in MHz, durations in microseconds, and magnetic
//! fields in millitesla unless a name says otherwise.

pub mod error;
pub mod protocol;
pub mod readout;
pub mod seqlang;
pub mod spin;
pub mod toy;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
