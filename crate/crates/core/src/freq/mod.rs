//! Frequentist comparators: the GMM estimator of the multiplicative
//! structural mean model, Balke-Pearl bounds and the first-stage F-test.

mod bounds;
mod ftest;
mod gmm;
mod root;

pub use bounds::{balke_pearl_bounds, bounds_from_counts, bounds_from_probs, BoundsResult};
pub use ftest::{first_stage_f, FTestResult};
pub use gmm::{gmm_msmm, gmm_point, GmmFit, GmmPoint, DEFAULT_BOOTSTRAP, PSI_BRACKET};
pub use root::brent;
