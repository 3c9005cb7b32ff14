use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate, ScenarioSpec};
use crate::data::{window, Window};
use crate::error::{Error, Result};
use crate::freq::{gmm_msmm, DEFAULT_BOOTSTRAP};
use crate::mcmc::SamplerConfig;
use crate::models::{fit, ModelSpec, ModelTag};
use crate::stats::{mean, quantile_sorted, sorted};

/// An estimator that can be run on one windowed dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EstimatorSpec {
    Bayes(ModelSpec),
    Gmm { bootstrap: usize },
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Bayes(m) => m.label(),
            EstimatorSpec::Gmm { .. } => "gmm".into(),
        }
    }

    /// Parses `gmm`, a model tag, or a model tag with a `+c` suffix for the
    /// constrained variant. `constrained` applies to bare model tags.
    pub fn parse(s: &str, constrained: bool, bootstrap: usize) -> Result<Self> {
        if s == "gmm" {
            return Ok(EstimatorSpec::Gmm { bootstrap });
        }
        let (tag, c) = match s.strip_suffix("+c") {
            Some(t) => (t, true),
            None => (s, constrained),
        };
        match ModelTag::from_str(tag) {
            Ok(tag) => Ok(EstimatorSpec::Bayes(ModelSpec::new(tag, c))),
            Err(_) => Err(Error::Config(format!(
                "unknown estimator `{s}`; valid: pois.pois, pois.flex, pois.prod.flex \
                 (optionally with +c), gmm"
            ))),
        }
    }
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        EstimatorSpec::Gmm {
            bootstrap: DEFAULT_BOOTSTRAP,
        }
    }
}

/// Point estimate and 95% interval from one estimator on one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub l95: f64,
    pub u95: f64,
    /// Largest split R-hat over all quantities (Bayesian fits only).
    pub max_rhat: Option<f64>,
    /// Smallest RRT draw (Bayesian fits only).
    pub min_draw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub result: std::result::Result<Interval, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub scenario: String,
    pub bandwidth: f64,
    pub estimator: String,
    pub true_rr: f64,
    pub replications: usize,
    pub failed: usize,
    /// `None` when every replicate failed.
    pub metrics: Option<CellMetrics>,
    pub replicates: Vec<ReplicateOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub mean_estimate: f64,
    pub median_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub mean_width: f64,
    pub median_width: f64,
    pub share_lower_negative: f64,
    /// Averages of the interval endpoints, for interval plots.
    pub mean_l95: f64,
    pub mean_u95: f64,
}

impl CellReport {
    pub fn intervals(&self) -> impl Iterator<Item = &Interval> {
        self.replicates
            .iter()
            .filter_map(|r| r.result.as_ref().ok())
    }

    pub fn share_failed(&self) -> f64 {
        self.failed as f64 / self.replications as f64
    }
}

fn aggregate(intervals: &[Interval], truth: f64) -> Option<CellMetrics> {
    if intervals.is_empty() {
        return None;
    }
    let est: Vec<f64> = intervals.iter().map(|i| i.estimate).collect();
    let widths: Vec<f64> = intervals.iter().map(|i| i.u95 - i.l95).collect();
    let n = intervals.len() as f64;
    let mean_estimate = mean(&est);
    Some(CellMetrics {
        mean_estimate,
        median_estimate: quantile_sorted(&sorted(&est), 0.5),
        bias: mean_estimate - truth,
        rmse: (est.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / n).sqrt(),
        coverage: intervals
            .iter()
            .filter(|i| i.l95 <= truth && truth <= i.u95)
            .count() as f64
            / n,
        mean_width: mean(&widths),
        median_width: quantile_sorted(&sorted(&widths), 0.5),
        share_lower_negative: intervals.iter().filter(|i| i.l95 < 0.0).count() as f64 / n,
        mean_l95: mean(&intervals.iter().map(|i| i.l95).collect::<Vec<_>>()),
        mean_u95: mean(&intervals.iter().map(|i| i.u95).collect::<Vec<_>>()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub cells: Vec<CellReport>,
}

impl SimReport {
    pub fn cell(&self, scenario: &str, bandwidth: f64, estimator: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| {
            c.scenario == scenario && c.bandwidth == bandwidth && c.estimator == estimator
        })
    }

    /// One row per scenario x bandwidth x estimator.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scenario",
            "bandwidth",
            "estimator",
            "true_rr",
            "replications",
            "failed",
            "mean",
            "median",
            "bias",
            "rmse",
            "coverage",
            "mean_width",
            "median_width",
            "share_lower_negative",
            "mean_l95",
            "mean_u95",
        ])?;
        for c in &self.cells {
            let mut row = vec![
                c.scenario.clone(),
                c.bandwidth.to_string(),
                c.estimator.clone(),
                c.true_rr.to_string(),
                c.replications.to_string(),
                c.failed.to_string(),
            ];
            match &c.metrics {
                Some(m) => row.extend(
                    [
                        m.mean_estimate,
                        m.median_estimate,
                        m.bias,
                        m.rmse,
                        m.coverage,
                        m.mean_width,
                        m.median_width,
                        m.share_lower_negative,
                        m.mean_l95,
                        m.mean_u95,
                    ]
                    .map(|v| v.to_string()),
                ),
                None => row.extend(std::iter::repeat_n("unavailable".to_string(), 10)),
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// SplitMix64 finalizer; derives independent seeds from structured keys.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

fn run_one(
    data: &[crate::data::Observation],
    window_spec: &Window,
    estimator: &EstimatorSpec,
    sampler: &SamplerConfig,
    seed: u64,
) -> std::result::Result<Interval, String> {
    let s = window(data, window_spec).map_err(|e| e.to_string())?;
    match estimator {
        EstimatorSpec::Bayes(model) => {
            let cfg = SamplerConfig {
                seed,
                ..sampler.clone()
            };
            let (chains, est) = fit(&s, model, &cfg).map_err(|e| e.to_string())?;
            let min_draw = chains
                .pooled("rrt")
                .map(|d| d.into_iter().fold(f64::INFINITY, f64::min));
            Ok(Interval {
                estimate: est.mean,
                l95: est.l95,
                u95: est.u95,
                max_rhat: est.max_rhat,
                min_draw,
            })
        }
        EstimatorSpec::Gmm { bootstrap } => {
            let g = gmm_msmm(&s, *bootstrap, seed).map_err(|e| e.to_string())?;
            match (g.l95, g.u95) {
                (Some(l95), Some(u95)) => Ok(Interval {
                    estimate: g.rrt,
                    l95,
                    u95,
                    max_rhat: None,
                    min_draw: None,
                }),
                _ => Err("no successful bootstrap replicate".into()),
            }
        }
    }
}

/// Generates every replicate, windows it at each bandwidth and runs each
/// estimator. Replicates run in parallel; every random stream is keyed by
/// `(seed, scenario, replicate, bandwidth, estimator)` so the report does not
/// depend on scheduling. Cells are ordered by bandwidth, then estimator.
pub fn run_grid(
    spec: &ScenarioSpec,
    estimators: &[EstimatorSpec],
    sampler: &SamplerConfig,
) -> Result<SimReport> {
    spec.validate()?;
    if estimators.is_empty() {
        return Err(Error::Config("no estimators given".into()));
    }
    sampler.validate()?;
    let windows = spec
        .bandwidths
        .iter()
        .map(|&h| Window::new(spec.dgp.threshold, h))
        .collect::<Result<Vec<_>>>()?;

    let scenario_key = spec.scenario.index() as u64;
    // [replicate][bandwidth][estimator]
    let results: Vec<Vec<Vec<std::result::Result<Interval, String>>>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| -> Result<_> {
            let data = generate(spec, r)?;
            Ok(windows
                .iter()
                .enumerate()
                .map(|(bi, w)| {
                    estimators
                        .iter()
                        .enumerate()
                        .map(|(ei, e)| {
                            let seed = mix_seed(&[
                                spec.seed,
                                scenario_key,
                                r as u64,
                                bi as u64,
                                ei as u64,
                            ]);
                            run_one(&data, w, e, sampler, seed)
                        })
                        .collect()
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let truth = spec.true_rr();
    let mut cells = Vec::new();
    for (bi, &h) in spec.bandwidths.iter().enumerate() {
        for (ei, e) in estimators.iter().enumerate() {
            let replicates: Vec<ReplicateOutcome> = results
                .iter()
                .enumerate()
                .map(|(r, per_bw)| ReplicateOutcome {
                    replicate: r,
                    result: per_bw[bi][ei].clone(),
                })
                .collect();
            let ok: Vec<Interval> = replicates
                .iter()
                .filter_map(|r| r.result.as_ref().ok().copied())
                .collect();
            cells.push(CellReport {
                scenario: spec.scenario.to_string(),
                bandwidth: h,
                estimator: e.label(),
                true_rr: truth,
                replications: spec.replications,
                failed: spec.replications - ok.len(),
                metrics: aggregate(&ok, truth),
                replicates,
            });
        }
    }
    Ok(SimReport { cells })
}

/// Runs several scenarios and concatenates their cells.
pub fn run_scenarios(
    specs: &[ScenarioSpec],
    estimators: &[EstimatorSpec],
    sampler: &SamplerConfig,
) -> Result<SimReport> {
    let mut cells = Vec::new();
    for spec in specs {
        cells.extend(run_grid(spec, estimators, sampler)?.cells);
    }
    Ok(SimReport { cells })
}
