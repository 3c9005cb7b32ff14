use super::suffstats::ArmStats;
use super::{ModelSpec, ModelTag, NormalPrior};
use crate::data::WindowedSample;
use crate::error::{Error, Result};
use crate::mcmc::TargetDensity;
use crate::stats::{expit, softplus};

// Parameter slots shared by all models. Slot 0 holds alpha_1, or the RRT
// itself in constrained models.
const HEAD: usize = 0;
const ALPHA0: usize = 1;
const BETA1: usize = 2;
const BETA0: usize = 3;
// pois.pois / pois.prod.flex
const DELTA1: usize = 4;
const DELTA0: usize = 5;
const GAMMA1: usize = 6;
const GAMMA0: usize = 7;
// pois.flex
const LOGIT_Q1: usize = 4;
const LOGIT_Q0: usize = 5;
// pois.prod.flex
const KAPPA1: usize = 8;
const KAPPA0: usize = 9;
const LOGIT_R1: usize = 10;
const LOGIT_R0: usize = 11;

/// Quantities implied by one parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    pub alpha1: f64,
    pub alpha0: f64,
    /// `exp(alpha_1) - exp(alpha_0)`.
    pub pi: f64,
    pub psi: f64,
    pub rrt: f64,
}

/// Posterior of one RRT model on a windowed sample.
#[derive(Debug, Clone)]
pub struct RrtTarget {
    spec: ModelSpec,
    /// Indexed by `z`.
    arms: [ArmStats; 2],
    warnings: Vec<String>,
}

/// `k ~ Binomial(n, expit(eta))` up to a constant.
fn binomial_logit(k: f64, n: f64, eta: f64) -> f64 {
    -k * softplus(-eta) - (n - k) * softplus(eta)
}

/// `sum_i [y_i (a + b x_i) - exp(a + b x_i)]` from summaries.
fn poisson_loglik(a: f64, b: f64, sum_y: f64, sum_y_x: f64, exp_sum: f64) -> f64 {
    a * sum_y + b * sum_y_x - a.exp() * exp_sum
}

impl RrtTarget {
    pub fn new(s: &WindowedSample, spec: ModelSpec) -> Result<Self> {
        spec.prior.validate()?;
        if s.n1 == 0 || s.n0 == 0 {
            return Err(Error::EmptyArm);
        }
        let arms = [
            ArmStats::from_sample(s, false),
            ArmStats::from_sample(s, true),
        ];
        let mut warnings = Vec::new();
        for (z, a) in arms.iter().enumerate() {
            if a.sum_y == 0.0 {
                warnings.push(format!("arm z={z} has no outcome events"));
            }
            if spec.tag == ModelTag::PoisProdFlex && a.n_tbar == 0 {
                warnings.push(format!("arm z={z} has no untreated records"));
            }
        }
        Ok(Self {
            spec,
            arms,
            warnings,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn arm(&self, z: bool) -> &ArmStats {
        &self.arms[z as usize]
    }

    /// Data conditions worth reporting alongside the estimate.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn psi(&self, theta: &[f64]) -> f64 {
        match self.spec.tag {
            ModelTag::PoisPois => theta[DELTA1].exp() - theta[DELTA0].exp(),
            ModelTag::PoisFlex => expit(theta[LOGIT_Q1]) - expit(theta[LOGIT_Q0]),
            ModelTag::PoisProdFlex => {
                (theta[DELTA1] + theta[KAPPA1]).exp() * expit(theta[LOGIT_R1])
                    - (theta[DELTA0] + theta[KAPPA0]).exp() * expit(theta[LOGIT_R0])
            }
        }
    }

    /// `None` when a constrained parameter vector leaves the support.
    pub fn components(&self, theta: &[f64]) -> Option<Components> {
        let psi = self.psi(theta);
        let alpha0 = theta[ALPHA0];
        if self.spec.constrained {
            let rrt = theta[HEAD];
            if !(rrt > 0.0) {
                return None;
            }
            let inside = (1.0 - rrt) * psi + alpha0.exp();
            if !(inside > 0.0) || !inside.is_finite() {
                return None;
            }
            let alpha1 = inside.ln();
            Some(Components {
                alpha1,
                alpha0,
                pi: alpha1.exp() - alpha0.exp(),
                psi,
                rrt,
            })
        } else {
            let alpha1 = theta[HEAD];
            let pi = alpha1.exp() - alpha0.exp();
            Some(Components {
                alpha1,
                alpha0,
                pi,
                psi,
                rrt: 1.0 - pi / psi,
            })
        }
    }

    fn numerator(&self, alpha1: f64, theta: &[f64]) -> f64 {
        let c = self.spec.prior.coefficient;
        let mut lp = c.log_density(theta[ALPHA0])
            + c.log_density(theta[BETA1])
            + c.log_density(theta[BETA0]);
        for (z, alpha, beta) in [(1, alpha1, theta[BETA1]), (0, theta[ALPHA0], theta[BETA0])] {
            let a = &self.arms[z];
            lp += poisson_loglik(alpha, beta, a.sum_y, a.sum_y_x, a.exp_all.eval(beta));
        }
        lp
    }

    fn denominator(&self, theta: &[f64]) -> f64 {
        let p = &self.spec.prior;
        let c = p.coefficient;
        let mut lp = 0.0;
        match self.spec.tag {
            ModelTag::PoisPois => {
                for (z, d, g) in [(1, DELTA1, GAMMA1), (0, DELTA0, GAMMA0)] {
                    let a = &self.arms[z];
                    let (delta, gamma) = (theta[d], theta[g]);
                    lp += c.log_density(delta) + c.log_density(gamma);
                    lp += poisson_loglik(
                        delta,
                        gamma,
                        a.sum_ytbar,
                        a.sum_ytbar_x,
                        a.exp_all.eval(gamma),
                    );
                }
            }
            ModelTag::PoisFlex => {
                for (z, q, prior) in [(1, LOGIT_Q1, p.logit_q1), (0, LOGIT_Q0, p.logit_q0)] {
                    let a = &self.arms[z];
                    lp += prior.log_density(theta[q])
                        + binomial_logit(a.sum_ytbar, a.n as f64, theta[q]);
                }
            }
            ModelTag::PoisProdFlex => {
                let slots: [(usize, usize, usize, usize, usize, NormalPrior); 2] = [
                    (1, DELTA1, GAMMA1, KAPPA1, LOGIT_R1, p.logit_r1),
                    (0, DELTA0, GAMMA0, KAPPA0, LOGIT_R0, p.logit_r0),
                ];
                for (z, d, g, k, r, prior) in slots {
                    let a = &self.arms[z];
                    let (delta, gamma, kappa) = (theta[d], theta[g], theta[k]);
                    lp += c.log_density(delta) + c.log_density(gamma) + c.log_density(kappa);
                    let exp_sum =
                        a.exp_treated.eval(gamma) + kappa.exp() * a.exp_untreated.eval(gamma);
                    lp += delta * a.sum_y + gamma * a.sum_y_x + kappa * a.sum_ytbar
                        - delta.exp() * exp_sum;
                    lp += prior.log_density(theta[r])
                        + binomial_logit(a.n_tbar as f64, a.n as f64, theta[r]);
                }
            }
        }
        lp
    }
}

impl TargetDensity for RrtTarget {
    fn param_names(&self) -> Vec<String> {
        let head = if self.spec.constrained {
            "rrt"
        } else {
            "alpha1"
        };
        let mut names = vec![head, "alpha0", "beta1", "beta0"];
        match self.spec.tag {
            ModelTag::PoisPois => names.extend(["delta1", "delta0", "gamma1", "gamma0"]),
            ModelTag::PoisFlex => names.extend(["logit_q1", "logit_q0"]),
            ModelTag::PoisProdFlex => names.extend([
                "delta1", "delta0", "gamma1", "gamma0", "kappa1", "kappa0", "logit_r1", "logit_r0",
            ]),
        }
        names.into_iter().map(String::from).collect()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let Some(comp) = self.components(theta) else {
            return f64::NEG_INFINITY;
        };
        let head_prior = if self.spec.constrained {
            self.spec.prior.rrt.log_density(comp.rrt)
        } else {
            self.spec.prior.coefficient.log_density(comp.alpha1)
        };
        let lp = head_prior + self.numerator(comp.alpha1, theta) + self.denominator(theta);
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }

    fn initial_point(&self) -> Vec<f64> {
        let p = &self.spec.prior;
        let log_rate = |mean: f64, n: usize| mean.max(1.0 / (2.0 * n as f64)).ln();
        let [a0, a1] = &self.arms;
        let alpha1 = log_rate(a1.mean_y(), a1.n);
        let alpha0 = log_rate(a0.mean_y(), a0.n);
        let head = if self.spec.constrained { 1.0 } else { alpha1 };
        let mut x = vec![head, alpha0, 0.0, 0.0];
        match self.spec.tag {
            ModelTag::PoisPois => x.extend([
                log_rate(a1.mean_ytbar(), a1.n),
                log_rate(a0.mean_ytbar(), a0.n),
                0.0,
                0.0,
            ]),
            ModelTag::PoisFlex => x.extend([p.logit_q1.mean, p.logit_q0.mean]),
            ModelTag::PoisProdFlex => x.extend([
                alpha1,
                alpha0,
                0.0,
                0.0,
                0.0,
                0.0,
                p.logit_r1.mean,
                p.logit_r0.mean,
            ]),
        }
        x
    }

    fn initial_scales(&self) -> Option<Vec<f64>> {
        let [a0, a1] = &self.arms;
        let intercept = |events: f64| 1.0 / events.max(1.0).sqrt();
        let slope = |events: f64, a: &ArmStats| intercept(events) / a.exp_all.std_dev().max(1e-3);
        let mut s = vec![
            if self.spec.constrained {
                0.5
            } else {
                intercept(a1.sum_y)
            },
            intercept(a0.sum_y),
            slope(a1.sum_y, a1),
            slope(a0.sum_y, a0),
        ];
        let logit = |k: f64, n: usize| {
            let n = n as f64;
            1.0 / (k * (n - k) / n).max(1.0).sqrt()
        };
        match self.spec.tag {
            ModelTag::PoisPois => s.extend([
                intercept(a1.sum_ytbar),
                intercept(a0.sum_ytbar),
                slope(a1.sum_ytbar, a1),
                slope(a0.sum_ytbar, a0),
            ]),
            ModelTag::PoisFlex => s.extend([logit(a1.sum_ytbar, a1.n), logit(a0.sum_ytbar, a0.n)]),
            ModelTag::PoisProdFlex => s.extend([
                intercept(a1.sum_y),
                intercept(a0.sum_y),
                slope(a1.sum_y, a1),
                slope(a0.sum_y, a0),
                intercept(a1.sum_ytbar),
                intercept(a0.sum_ytbar),
                logit(a1.n_tbar as f64, a1.n),
                logit(a0.n_tbar as f64, a0.n),
            ]),
        }
        Some(s)
    }

    fn derived_names(&self) -> Vec<String> {
        let names: &[&str] = if self.spec.constrained {
            &["alpha1", "pi", "psi"]
        } else {
            &["rrt", "pi", "psi"]
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    fn derived(&self, theta: &[f64]) -> Vec<f64> {
        match self.components(theta) {
            Some(c) if self.spec.constrained => vec![c.alpha1, c.pi, c.psi],
            Some(c) => vec![c.rrt, c.pi, c.psi],
            None => vec![f64::NAN; 3],
        }
    }
}
