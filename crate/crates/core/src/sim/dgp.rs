//! Data-generating process for the twelve simulation scenarios.
//!
//! ```text
//! X ~ Normal(0.2, 0.06^2) truncated to (0.01, 0.6)     risk score
//! U ~ Normal(0, 1)                                     unmeasured confounder
//! Z = 1{X >= 0.2}
//! T ~ Bernoulli(expit(a0 + aZ Z + aU U)),  a0 = -aZ/2 - 0.25
//! Y ~ Bernoulli(min(0.99, exp(b0 + bT T + bU U)))
//! ```
//!
//! The outcome model is log-linear in `T` with no `T x Z` interaction, so the
//! risk ratio for the treated equals `exp(bT)` exactly (up to the rare
//! clipping at 0.99, which is counted and bounded).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::data::Observation;
use crate::error::{Error, Result};
use crate::stats::expit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Weak,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confounding {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    None,
    Low,
    High,
}

impl Strength {
    pub const ALL: [Strength; 2] = [Strength::Weak, Strength::Strong];
}

impl Confounding {
    pub const ALL: [Confounding; 2] = [Confounding::Low, Confounding::High];
}

impl Effect {
    pub const ALL: [Effect; 3] = [Effect::None, Effect::Low, Effect::High];
}

/// Every coefficient of the generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpConfig {
    pub threshold: f64,
    pub x_mean: f64,
    pub x_sd: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub a_z_weak: f64,
    pub a_z_strong: f64,
    pub a_u_low: f64,
    pub a_u_high: f64,
    /// `a0 = -aZ / 2 + a0_shift`.
    pub a0_shift: f64,
    pub b0: f64,
    /// Log risk ratios for no, low and high effect.
    pub b_t: [f64; 3],
    pub b_u_low: f64,
    pub b_u_high: f64,
    pub probability_cap: f64,
    /// Largest tolerated share of records whose outcome probability is capped.
    pub max_clip_share: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            threshold: 0.2,
            x_mean: 0.2,
            x_sd: 0.06,
            x_min: 0.01,
            x_max: 0.6,
            a_z_weak: 1.0,
            a_z_strong: 4.0,
            a_u_low: 0.5,
            a_u_high: 2.0,
            a0_shift: -0.25,
            b0: -3.5,
            b_t: [0.0, 0.75, 1.5],
            b_u_low: 0.3,
            b_u_high: 0.5,
            probability_cap: 0.99,
            max_clip_share: 0.001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub strength: Strength,
    pub confounding: Confounding,
    pub effect: Effect,
}

impl Scenario {
    /// All twelve combinations in a fixed order.
    pub fn all() -> Vec<Scenario> {
        let mut out = Vec::with_capacity(12);
        for strength in Strength::ALL {
            for confounding in Confounding::ALL {
                for effect in Effect::ALL {
                    out.push(Scenario {
                        strength,
                        confounding,
                        effect,
                    });
                }
            }
        }
        out
    }

    /// Position in [`Scenario::all`].
    pub fn index(&self) -> usize {
        let s = self.strength as usize;
        let c = self.confounding as usize;
        let e = self.effect as usize;
        s * 6 + c * 3 + e
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.strength {
            Strength::Weak => "weak",
            Strength::Strong => "strong",
        };
        let c = match self.confounding {
            Confounding::Low => "low",
            Confounding::High => "high",
        };
        let e = match self.effect {
            Effect::None => "none",
            Effect::Low => "low",
            Effect::High => "high",
        };
        write!(f, "{s}/{c}/{e}")
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// `strength/confounding/effect`, e.g. `strong/low/high`.
    fn from_str(s: &str) -> Result<Self> {
        Scenario::all()
            .into_iter()
            .find(|sc| sc.to_string() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown scenario `{s}`; expected strength/confounding/effect \
                     with strength in {{weak,strong}}, confounding in {{low,high}}, \
                     effect in {{none,low,high}}"
                ))
            })
    }
}

/// One scenario plus the study design around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    /// Records per dataset before windowing.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_bandwidths")]
    pub bandwidths: Vec<f64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dgp: DgpConfig,
}

fn default_n() -> usize {
    10_000
}

fn default_bandwidths() -> Vec<f64> {
    crate::data::DEFAULT_BANDWIDTHS.to_vec()
}

fn default_replications() -> usize {
    100
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            n: default_n(),
            bandwidths: default_bandwidths(),
            replications: default_replications(),
            seed: 0,
            dgp: DgpConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("sample size must be positive".into()));
        }
        if self.bandwidths.is_empty() || self.bandwidths.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::Config("bandwidths must be positive".into()));
        }
        let d = &self.dgp;
        if !(d.x_sd > 0.0 && d.x_min < d.x_max && d.x_min >= 0.0 && d.x_max <= 1.0) {
            return Err(Error::Config("invalid risk-score distribution".into()));
        }
        Ok(())
    }

    pub fn a_z(&self) -> f64 {
        match self.scenario.strength {
            Strength::Weak => self.dgp.a_z_weak,
            Strength::Strong => self.dgp.a_z_strong,
        }
    }

    pub fn a_u(&self) -> f64 {
        match self.scenario.confounding {
            Confounding::Low => self.dgp.a_u_low,
            Confounding::High => self.dgp.a_u_high,
        }
    }

    pub fn a0(&self) -> f64 {
        -self.a_z() / 2.0 + self.dgp.a0_shift
    }

    pub fn b_t(&self) -> f64 {
        self.dgp.b_t[self.scenario.effect as usize]
    }

    pub fn b_u(&self) -> f64 {
        match self.scenario.confounding {
            Confounding::Low => self.dgp.b_u_low,
            Confounding::High => self.dgp.b_u_high,
        }
    }

    /// The risk ratio for the treated implied by the generating process.
    pub fn true_rr(&self) -> f64 {
        self.b_t().exp()
    }
}

/// A generated dataset with the confounder kept for oracle checks.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub observations: Vec<Observation>,
    pub confounder: Vec<f64>,
    pub clipped: usize,
}

/// RNG for replicate `r` of a scenario: ChaCha stream keyed by the scenario
/// index and the replicate.
pub fn replicate_rng(spec: &ScenarioSpec, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(((spec.scenario.index() as u64) << 40) | replicate as u64);
    rng
}

/// Draws `n` records. Fails when the share of capped outcome probabilities
/// reaches `max_clip_share`.
pub fn generate_n(spec: &ScenarioSpec, replicate: usize, n: usize) -> Result<GeneratedData> {
    spec.validate()?;
    let d = &spec.dgp;
    let mut rng = replicate_rng(spec, replicate);
    let x_dist = Normal::new(d.x_mean, d.x_sd).map_err(|e| Error::Config(e.to_string()))?;
    let (a0, az, au) = (spec.a0(), spec.a_z(), spec.a_u());
    let (b0, bt, bu) = (d.b0, spec.b_t(), spec.b_u());

    let mut observations = Vec::with_capacity(n);
    let mut confounder = Vec::with_capacity(n);
    let mut clipped = 0usize;
    for _ in 0..n {
        let x = loop {
            let v: f64 = x_dist.sample(&mut rng);
            if v > d.x_min && v < d.x_max {
                break v;
            }
        };
        let u: f64 = rng.sample(StandardNormal);
        let z = x >= d.threshold;
        let t = rng.random::<f64>() < expit(a0 + az * z as u8 as f64 + au * u);
        let mut p = (b0 + bt * t as u8 as f64 + bu * u).exp();
        if p > d.probability_cap {
            p = d.probability_cap;
            clipped += 1;
        }
        let y = rng.random::<f64>() < p;
        observations.push(Observation { x, t, y });
        confounder.push(u);
    }
    if clipped as f64 >= d.max_clip_share * n as f64 {
        return Err(Error::ProbabilityOverflow { clipped, total: n });
    }
    Ok(GeneratedData {
        observations,
        confounder,
        clipped,
    })
}

/// Dataset `replicate` of the scenario, `spec.n` records.
pub fn generate(spec: &ScenarioSpec, replicate: usize) -> Result<Vec<Observation>> {
    generate_n(spec, replicate, spec.n).map(|g| g.observations)
}
