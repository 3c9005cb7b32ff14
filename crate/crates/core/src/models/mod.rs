//! Bayesian models for the risk ratio for the treated.
//!
//! Every model shares the Poisson numerator
//! `y ~ Poisson(exp(alpha_z + beta_z x*))` in each arm, giving
//! `Pi = exp(alpha_1) - exp(alpha_0)`, and differs in how the denominator
//! `Psi ~ E(Y(1-T)|Z=1) - E(Y(1-T)|Z=0)` is modelled:
//!
//! | tag              | denominator                                                      |
//! |------------------|------------------------------------------------------------------|
//! | `pois.pois`      | `y tbar ~ Poisson(exp(delta_z + gamma_z x*))`                     |
//! | `pois.flex`      | `sum y tbar ~ Binomial(n_z, q_z)`, informative logit priors       |
//! | `pois.prod.flex` | `y ~ Poisson(exp(delta_z + gamma_z x* + kappa_z tbar))`, `sum tbar ~ Binomial(n_z, r_z)` |
//!
//! and `RRT = 1 - Pi / Psi`. The constrained variants put a prior directly on
//! the RRT and derive `alpha_1 = log{(1 - RRT) Psi + exp(alpha_0)}`, which keeps
//! every posterior draw of the RRT positive.

mod suffstats;
mod summary;
mod target;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use suffstats::{ArmStats, ExpSum};
pub use summary::{summarize, RrtEstimate, WIDE_INTERVAL};
pub use target::{Components, RrtTarget};

use crate::data::WindowedSample;
use crate::error::{Error, Result};
use crate::mcmc::{self, ChainSet, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub variance: f64,
}

impl NormalPrior {
    pub const fn new(mean: f64, variance: f64) -> Self {
        Self { mean, variance }
    }

    /// Unnormalized log density.
    pub fn log_density(&self, v: f64) -> f64 {
        -0.5 * (v - self.mean).powi(2) / self.variance
    }
}

/// Prior placed on the RRT in constrained models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum RrtPrior {
    Gamma { shape: f64, rate: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl RrtPrior {
    /// Unnormalized log density; `-inf` for non-positive values.
    pub fn log_density(&self, v: f64) -> f64 {
        if !(v > 0.0) {
            return f64::NEG_INFINITY;
        }
        match *self {
            RrtPrior::Gamma { shape, rate } => (shape - 1.0) * v.ln() - rate * v,
            RrtPrior::LogNormal { mu, sigma } => {
                let l = v.ln();
                -l - 0.5 * ((l - mu) / sigma).powi(2)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Shared by every regression coefficient.
    pub coefficient: NormalPrior,
    /// Priors on `logit(q_1)`, `logit(q_0)` (flex denominator).
    pub logit_q1: NormalPrior,
    pub logit_q0: NormalPrior,
    /// Priors on `logit(r_1)`, `logit(r_0)` (product denominator).
    pub logit_r1: NormalPrior,
    pub logit_r0: NormalPrior,
    pub rrt: RrtPrior,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            coefficient: NormalPrior::new(0.0, 100.0),
            logit_q1: NormalPrior::new(-3.0, 1.0),
            logit_q0: NormalPrior::new(3.0, 1.0),
            logit_r1: NormalPrior::new(-3.0, 1.0),
            logit_r0: NormalPrior::new(3.0, 1.0),
            rrt: RrtPrior::Gamma {
                shape: 3.0,
                rate: 1.0,
            },
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let normals = [
            self.coefficient,
            self.logit_q1,
            self.logit_q0,
            self.logit_r1,
            self.logit_r0,
        ];
        if normals
            .iter()
            .any(|p| !(p.variance > 0.0) || !p.mean.is_finite() || !p.variance.is_finite())
        {
            return Err(Error::Config("prior variances must be positive".into()));
        }
        let ok = match self.rrt {
            RrtPrior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
            RrtPrior::LogNormal { mu, sigma } => mu.is_finite() && sigma > 0.0,
        };
        if !ok {
            return Err(Error::Config("invalid RRT prior parameters".into()));
        }
        Ok(())
    }
}

/// Denominator variant; the numerator is always Poisson.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "pois.pois")]
    PoisPois,
    #[serde(rename = "pois.flex")]
    PoisFlex,
    #[serde(rename = "pois.prod.flex")]
    PoisProdFlex,
}

impl ModelTag {
    pub const ALL: [ModelTag; 3] = [
        ModelTag::PoisPois,
        ModelTag::PoisFlex,
        ModelTag::PoisProdFlex,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::PoisPois => "pois.pois",
            ModelTag::PoisFlex => "pois.flex",
            ModelTag::PoisProdFlex => "pois.prod.flex",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model tag `{s}`; expected one of pois.pois, pois.flex, pois.prod.flex"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub tag: ModelTag,
    pub constrained: bool,
    pub prior: PriorSpec,
}

impl ModelSpec {
    pub fn new(tag: ModelTag, constrained: bool) -> Self {
        Self {
            tag,
            constrained,
            prior: PriorSpec::default(),
        }
    }

    /// `pois.flex`, or `pois.flex+c` for the constrained variant.
    pub fn label(&self) -> String {
        if self.constrained {
            format!("{}+c", self.tag)
        } else {
            self.tag.to_string()
        }
    }
}

pub fn build_target_pois_pois(
    s: &WindowedSample,
    prior: &PriorSpec,
    constrained: bool,
) -> Result<RrtTarget> {
    RrtTarget::new(
        s,
        ModelSpec {
            tag: ModelTag::PoisPois,
            constrained,
            prior: *prior,
        },
    )
}

pub fn build_target_pois_flex(
    s: &WindowedSample,
    prior: &PriorSpec,
    constrained: bool,
) -> Result<RrtTarget> {
    RrtTarget::new(
        s,
        ModelSpec {
            tag: ModelTag::PoisFlex,
            constrained,
            prior: *prior,
        },
    )
}

pub fn build_target_pois_prod_flex(
    s: &WindowedSample,
    prior: &PriorSpec,
    constrained: bool,
) -> Result<RrtTarget> {
    RrtTarget::new(
        s,
        ModelSpec {
            tag: ModelTag::PoisProdFlex,
            constrained,
            prior: *prior,
        },
    )
}

/// Builds the target, samples it and summarizes the RRT draws.
pub fn fit(
    s: &WindowedSample,
    spec: &ModelSpec,
    cfg: &SamplerConfig,
) -> Result<(ChainSet, RrtEstimate)> {
    let target = RrtTarget::new(s, *spec)?;
    let chains = mcmc::sample(&target, cfg)?;
    let mut estimate = summarize(&chains, &spec.label(), s.window.bandwidth, s.n1, s.n0)?;
    estimate
        .warnings
        .splice(0..0, target.warnings().iter().cloned());
    Ok((chains, estimate))
}
