//! Desk-scale optimizer benchmarking toolkit.
//!
//! The crate trains a small model zoo (plain/residual/mixer/linear families
//! on synthetic datasets) with twenty gradient-based optimizers behind one
//! unified step interface, then runs the coupling-bias analyses on the
//! resulting accuracy matrices: quantile-threshold failure detection,
//! worst-removed stability statistics, hyper-parameter variation, weighted
//! optimizer rankings, and per-layer weight-spectrum diagnostics.

pub mod analysis;
pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod math;
pub mod opt;
pub mod zoo;

pub use error::{Error, Result};
