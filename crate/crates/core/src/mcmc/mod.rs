//! Multi-chain adaptive random-walk Metropolis-within-Gibbs sampler.
//!
//! Each coordinate is updated in turn with a Gaussian random-walk proposal.
//! During burn-in the per-coordinate proposal scales are tuned on the log
//! scale in batches of [`ADAPT_BATCH`] iterations towards a target acceptance
//! rate; afterwards they are frozen so the retained draws come from a
//! time-homogeneous kernel.
//!
//! Chain `k` draws from its own ChaCha stream `(seed, k)`, so results do not
//! depend on how chains are scheduled across threads.

mod diagnostics;

pub use diagnostics::{diagnostics, effective_sample_size, split_rhat, ParamDiagnostics};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Iterations per adaptation batch.
pub const ADAPT_BATCH: usize = 50;
/// R-hat above this produces a warning (never an error).
pub const RHAT_WARNING: f64 = 1.05;
const INIT_ATTEMPTS: usize = 100;
const DEFAULT_SCALE: f64 = 0.1;

/// An unnormalized log posterior over a fixed-dimension parameter vector.
///
/// `log_density` must never return NaN; points outside the support return
/// `f64::NEG_INFINITY`. Implementations are evaluated from several threads.
pub trait TargetDensity: Sync {
    fn param_names(&self) -> Vec<String>;

    fn dim(&self) -> usize {
        self.param_names().len()
    }

    fn log_density(&self, theta: &[f64]) -> f64;

    /// Starting point for every chain.
    fn initial_point(&self) -> Vec<f64>;

    /// Suggested per-coordinate proposal scales before adaptation.
    fn initial_scales(&self) -> Option<Vec<f64>> {
        None
    }

    /// Names of deterministic functions of the parameters recorded per draw.
    fn derived_names(&self) -> Vec<String> {
        Vec::new()
    }

    fn derived(&self, _theta: &[f64]) -> Vec<f64> {
        Vec::new()
    }
}

/// A target built from closures; convenient for tests and bindings.
pub struct FnTarget<F, D = fn(&[f64]) -> Vec<f64>> {
    pub names: Vec<String>,
    pub log_density: F,
    pub initial: Vec<f64>,
    pub derived_names: Vec<String>,
    pub derived: Option<D>,
}

impl<F> FnTarget<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(names: &[&str], initial: Vec<f64>, log_density: F) -> Self {
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            log_density,
            initial,
            derived_names: Vec::new(),
            derived: None,
        }
    }
}

impl<F, D> TargetDensity for FnTarget<F, D>
where
    F: Fn(&[f64]) -> f64 + Sync,
    D: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn param_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        (self.log_density)(theta)
    }

    fn initial_point(&self) -> Vec<f64> {
        self.initial.clone()
    }

    fn derived_names(&self) -> Vec<String> {
        self.derived_names.clone()
    }

    fn derived(&self, theta: &[f64]) -> Vec<f64> {
        self.derived.as_ref().map(|d| d(theta)).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    pub burn_in: usize,
    /// Post-burn-in iterations.
    pub iterations: usize,
    /// Number of (thinned) draws kept per chain, taken from the end of the run.
    pub retain: usize,
    /// Keep every `thin`-th post-burn-in draw.
    pub thin: usize,
    /// Keep every thinned post-burn-in draw, ignoring `retain`.
    pub full_trace: bool,
    pub seed: u64,
    /// Per-coordinate initial proposal scales; falls back to the target's
    /// suggestion, then to 0.1.
    pub initial_scale: Option<Vec<f64>>,
    pub target_acceptance: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 2,
            burn_in: 10_000,
            iterations: 50_000,
            retain: 1_000,
            thin: 50,
            full_trace: false,
            seed: 1,
            initial_scale: None,
            target_acceptance: 0.44,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::Config("at least one chain required".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.retain == 0 || self.retain > self.iterations / self.thin {
            return Err(Error::Config(format!(
                "retain ({}) must be between 1 and iterations / thin ({})",
                self.retain,
                self.iterations / self.thin
            )));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Config("target acceptance must lie in (0,1)".into()));
        }
        Ok(())
    }

    fn kept_per_chain(&self) -> usize {
        if self.full_trace {
            self.iterations / self.thin
        } else {
            self.retain
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// Retained draws, row-major `retained x dim`.
    pub draws: Vec<f64>,
    /// Derived quantities, row-major `retained x n_derived`.
    pub derived: Vec<f64>,
    /// Post-burn-in acceptance rate per coordinate.
    pub acceptance: Vec<f64>,
    pub burn_in_scales: Vec<f64>,
    pub final_scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSet {
    pub param_names: Vec<String>,
    pub derived_names: Vec<String>,
    pub retained: usize,
    pub chains: Vec<Chain>,
    /// Parameters first, then derived quantities.
    pub diagnostics: Vec<ParamDiagnostics>,
    pub warnings: Vec<String>,
}

impl ChainSet {
    pub fn dim(&self) -> usize {
        self.param_names.len()
    }

    /// Draws of parameter `j` for each chain.
    pub fn param(&self, j: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        self.chains
            .iter()
            .map(|c| c.draws.iter().skip(j).step_by(d).copied().collect())
            .collect()
    }

    /// Draws of a parameter or derived quantity by name, per chain.
    pub fn series(&self, name: &str) -> Option<Vec<Vec<f64>>> {
        if let Some(j) = self.param_names.iter().position(|n| n == name) {
            return Some(self.param(j));
        }
        let j = self.derived_names.iter().position(|n| n == name)?;
        let d = self.derived_names.len();
        Some(
            self.chains
                .iter()
                .map(|c| c.derived.iter().skip(j).step_by(d).copied().collect())
                .collect(),
        )
    }

    /// All chains concatenated.
    pub fn pooled(&self, name: &str) -> Option<Vec<f64>> {
        self.series(name).map(|s| s.concat())
    }

    /// The parameter vector of draw `i` in chain `c`.
    pub fn draw(&self, c: usize, i: usize) -> &[f64] {
        let d = self.dim();
        &self.chains[c].draws[i * d..(i + 1) * d]
    }

    pub fn diagnostic(&self, name: &str) -> Option<&ParamDiagnostics> {
        self.diagnostics.iter().find(|d| d.name == name)
    }

    pub fn max_rhat(&self) -> Option<f64> {
        self.diagnostics
            .iter()
            .filter_map(|d| d.rhat)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn initialize<T: TargetDensity + ?Sized>(
    target: &T,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    let start = target.initial_point();
    let lp = target.log_density(&start);
    if lp.is_finite() {
        return Ok((start, lp));
    }
    for _ in 0..INIT_ATTEMPTS {
        let x: Vec<f64> = start
            .iter()
            .map(|v| v + DEFAULT_SCALE * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = target.log_density(&x);
        if lp.is_finite() {
            return Ok((x, lp));
        }
    }
    Err(Error::NoInitialPoint(INIT_ATTEMPTS))
}

fn run_chain<T: TargetDensity + ?Sized>(
    target: &T,
    cfg: &SamplerConfig,
    scales0: &[f64],
    k: usize,
) -> Result<Chain> {
    let dim = target.dim();
    let mut rng = chain_rng(cfg.seed, k);
    let (mut x, mut lp) = initialize(target, &mut rng)?;
    let mut log_scale: Vec<f64> = scales0.iter().map(|s| s.ln()).collect();

    let step = |x: &mut Vec<f64>,
                lp: &mut f64,
                log_scale: &[f64],
                rng: &mut ChaCha8Rng,
                accepted: &mut [usize]| {
        for j in 0..dim {
            let old = x[j];
            x[j] = old + log_scale[j].exp() * rng.sample::<f64, _>(StandardNormal);
            let proposal = target.log_density(x);
            debug_assert!(!proposal.is_nan(), "log density returned NaN");
            let u: f64 = rng.random();
            if proposal > f64::NEG_INFINITY && u.ln() < proposal - *lp {
                *lp = proposal;
                accepted[j] += 1;
            } else {
                x[j] = old;
            }
        }
    };

    let mut batch_accepts = vec![0usize; dim];
    let mut burn_accepts = 0usize;
    let mut batch = 0usize;
    for it in 0..cfg.burn_in {
        step(&mut x, &mut lp, &log_scale, &mut rng, &mut batch_accepts);
        if (it + 1) % ADAPT_BATCH == 0 || it + 1 == cfg.burn_in {
            batch += 1;
            let len = (it % ADAPT_BATCH + 1) as f64;
            let delta = 1.0 / (batch as f64).sqrt();
            for j in 0..dim {
                let rate = batch_accepts[j] as f64 / len;
                burn_accepts += batch_accepts[j];
                if rate > cfg.target_acceptance {
                    log_scale[j] += delta;
                } else {
                    log_scale[j] -= delta;
                }
                batch_accepts[j] = 0;
            }
        }
    }
    if cfg.burn_in > 0 && burn_accepts == 0 {
        return Err(Error::SamplerStuck(format!(
            "chain {k} rejected every proposal during burn-in"
        )));
    }
    let burn_in_scales: Vec<f64> = log_scale.iter().map(|l| l.exp()).collect();

    let stored_total = cfg.iterations / cfg.thin;
    let keep = cfg.kept_per_chain();
    let first_kept = stored_total - keep;
    let mut draws = Vec::with_capacity(keep * dim);
    let mut accepted = vec![0usize; dim];
    for it in 0..cfg.iterations {
        step(&mut x, &mut lp, &log_scale, &mut rng, &mut accepted);
        if (it + 1) % cfg.thin == 0 {
            let stored = (it + 1) / cfg.thin - 1;
            if stored >= first_kept && stored < stored_total {
                draws.extend_from_slice(&x);
            }
        }
    }
    let derived = draws
        .chunks(dim)
        .flat_map(|th| target.derived(th))
        .collect();
    let acceptance = accepted
        .iter()
        .map(|&a| a as f64 / cfg.iterations.max(1) as f64)
        .collect();
    Ok(Chain {
        draws,
        derived,
        acceptance,
        burn_in_scales: burn_in_scales.clone(),
        final_scales: log_scale.iter().map(|l| l.exp()).collect(),
    })
}

/// Runs `cfg.chains` independent chains (in parallel) and computes split
/// R-hat and effective sample size for every parameter and derived quantity.
pub fn sample<T: TargetDensity + ?Sized>(target: &T, cfg: &SamplerConfig) -> Result<ChainSet> {
    cfg.validate()?;
    let dim = target.dim();
    if dim == 0 {
        return Err(Error::Config("target has dimension 0".into()));
    }
    let scales = cfg
        .initial_scale
        .clone()
        .or_else(|| target.initial_scales())
        .unwrap_or_else(|| vec![DEFAULT_SCALE; dim]);
    if scales.len() != dim || scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::Config(format!(
            "need {dim} positive initial proposal scales"
        )));
    }

    let chains = (0..cfg.chains)
        .into_par_iter()
        .map(|k| run_chain(target, cfg, &scales, k))
        .collect::<Result<Vec<_>>>()?;

    let mut set = ChainSet {
        param_names: target.param_names(),
        derived_names: target.derived_names(),
        retained: cfg.kept_per_chain(),
        chains,
        diagnostics: Vec::new(),
        warnings: Vec::new(),
    };
    if set.retained >= 4 {
        set.diagnostics = diagnostics(&set)?;
        for d in &set.diagnostics {
            if let Some(r) = d.rhat {
                if r > RHAT_WARNING {
                    set.warnings.push(format!(
                        "R-hat for {} is {:.3} (> {RHAT_WARNING})",
                        d.name, r
                    ));
                }
            }
        }
    }
    Ok(set)
}
