//! emamon-core: continuous symptom monitoring from EMA self-reports.
//!
//! The library covers the full monitoring loop over per-patient blocks:
//! forecasting the EMA sum score from lagged features, detecting downward
//! shifts in the merged historical+predicted series, and generating
//! counterfactual explanations for alerted predictions. A seeded synthetic
//! cohort generator with planted change points backs all evaluations.

pub mod changepoint;
pub mod counterfactual;
pub mod data;
pub mod error;
pub mod forecast;
pub mod seeds;
pub mod synthcohort;
pub mod workflow;

pub use error::{Error, Result};
