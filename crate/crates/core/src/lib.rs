//! Squeezing and intensity of the cavity and output radiation of a degenerate
//! coherent beat laser whose cavity is coupled to broadband biased noise.
//!
//! [`analytic`] holds the closed-form steady state. [`langevin`] and [`master`]
//! are independent numerical oracles for it; [`verify`] runs them against the
//! closed form, [`sweep`] produces CSV parameter scans and [`report`] documents
//! sign reconciliations in the published formulas.

pub mod analytic;
pub mod error;
pub mod langevin;
pub mod master;
pub mod model;
pub mod report;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use model::SystemParams;
