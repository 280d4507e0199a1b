//! Supercapacitor energy-storage banks for power-system dynamics studies.
//!
//! The crate models a nonlinear supercapacitor cell (voltage-dependent
//! capacitance, series resistance and RC groups), scales it to a bank, wraps
//! it in the converter control chain (state-of-voltage gate, PQ control,
//! ride-through limiting, inertial and droop frequency support) and couples it
//! to a reduced grid. Scenarios are TOML files; [`engine::run`] simulates one
//! and [`sweep`] and [`study`] drive families of runs.
//!
//! ```
//! use scbank::cell::{CellParams, IdealVariant, ideal_from};
//!
//! let cell = CellParams::default();
//! let ideal = ideal_from(&cell, IdealVariant::AtRated);
//! assert!(ideal.stored_energy(2.0) > cell.stored_energy(2.0).unwrap());
//! ```

pub mod app;
pub mod bank;
pub mod cell;
pub mod control;
pub mod engine;
pub mod error;
pub mod grid;
pub mod ode;
pub mod output;
pub mod scenario;
pub mod study;
pub mod sweep;

pub use engine::{run, SimResult};
pub use error::{Error, Result};
pub use scenario::{ModelVariant, Scenario};
