//! DICE-2016 climate-economy scenarios calibrated to SSP baselines, and
//! excess-mortality stress tests for life-insurance and annuity portfolios.

pub mod actuarial;
pub mod calibration;
pub mod cli;
pub mod engine;
pub mod error;
pub mod exogenous;
pub mod model;
pub mod mortality;
pub mod optimizer;
pub mod params;
pub mod scc;
pub mod scenario;
pub mod simulation;

pub use error::{Error, Result};
pub use exogenous::ExogenousPaths;
pub use params::ModelParams;
