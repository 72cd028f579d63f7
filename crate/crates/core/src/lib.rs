//! Periodic-disturbance observer with adaptive frequency estimation.
//!
//! The crate is organised bottom-up:
//!
//! - [`signal`]: delay line, low-pass, band-pass, notch filter, DFT and RMS helpers.
//! - [`pdob`]: the periodic-disturbance observer, its delay design and frequency-response tooling.
//! - [`anf`]: adaptive notch filter frequency estimator driven by a multi-rate RLS update.
//! - [`adaptive`]: observer whose delay follows the estimated fundamental.
//! - [`sim`]: double-integrator plant, baseline compensators and scripted experiments.

pub mod adaptive;
pub mod anf;
pub mod error;
pub mod pdob;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
