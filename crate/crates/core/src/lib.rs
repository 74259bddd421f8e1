//! Population transfer in a three-level Λ system driven by STIRAP and
//! superadiabatic (counterdiabatic-assisted) STIRAP pulses, with loss from
//! the intermediate level and Ornstein-Uhlenbeck dephasing of the level
//! energies.
//!
//! Units throughout: ħ = 1, pulse width T = 1. Rates are in 1/T, times in T.

pub mod commands;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod integrator;
pub mod model;
pub mod noise;
pub mod output;
pub mod pulses;
pub mod seed;

pub use error::{Error, Result};
