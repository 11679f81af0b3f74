//! Fault-location workbench for a radial three-terminal HVDC network.
//!
//! The crate simulates labeled fault and load-step transients on a lumped
//! line model, turns single-terminal voltage/current windows into
//! standardized tabular data, trains a from-scratch gradient-boosted tree
//! regressor against classical baselines (OLS, kNN, a single tree, and
//! the impedance-based locator), and reports 7-fold MAE, learning curves,
//! timing curves, and noise sweeps as CSV and SVG artifacts.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod gbt;
pub mod harness;
pub mod model_io;
pub mod sim;

pub use error::{Error, Result};
