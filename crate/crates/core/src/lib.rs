//! Motional dephasing of a laser-driven ground/Rydberg atom next to a pinned Rydberg
//! neighbour: split-step propagation, the perturbative short-time model, and
//! dephasing-rate extraction from the coherence maxima.

// `!(a > b)` is used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod config;
pub mod error;
pub mod evolution;
pub mod fitting;
pub mod grid;
pub mod observables;
pub mod params;

pub use error::{Error, Result};
