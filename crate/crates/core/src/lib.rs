//! Sensing limits and estimators for monostatic 5G NR range/velocity sensing.
//!
//! Modules, bottom-up: [`params`] (numerology), [`patterns`] (sensing
//! resource grids), [`channel`] (post-FFT observations), [`crlb`] (Fisher
//! information and bounds), [`estimators`] (two-step and plain periodogram
//! estimators), [`experiments`] (Monte Carlo harness) and [`config`] (run
//! configuration files) and [`cli`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod config;
pub mod crlb;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod params;
pub mod patterns;

pub use error::{Error, Result};
