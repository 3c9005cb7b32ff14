//! Estimation of the risk ratio for the treated (RRT) in fuzzy regression
//! discontinuity designs with binary outcomes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod explore;
pub mod freq;
pub mod mcmc;
pub mod models;
mod serde_float;
pub mod sim;
pub mod spline;
pub mod stats;

pub use data::{
    load_dataset, plug_in_rrt, window, CellCounts, ColumnMap, Observation, Window, WindowedRecord,
    WindowedSample,
};
pub use error::{Error, Result};
pub use models::{ModelSpec, ModelTag, PriorSpec, RrtEstimate};
