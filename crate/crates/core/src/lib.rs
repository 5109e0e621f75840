//! Simulation and verification lab for the ⊕^k Forrelation problem.

pub mod adversaries;
pub mod dist;
pub mod error;
pub mod fourier;
pub mod harness;
pub mod identity;
pub mod problem;
pub mod quantum;
pub mod report;
pub mod rng;
pub mod wht;

pub use dist::{ForrelationParams, Parity, SignVector, Source};
pub use error::{Error, Result};
pub use problem::PromiseLabel;
pub use report::ExperimentReport;
