//! Split R-hat and autocorrelation-based effective sample size.

use serde::{Deserialize, Serialize};

use super::ChainSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub name: String,
    /// `None` with a single chain.
    pub rhat: Option<f64>,
    pub ess: f64,
    /// Zero within-chain variance; R-hat is reported as 1 (or infinity when
    /// the chains sit at different constants).
    pub degenerate: bool,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

fn check_lengths(chains: &[&[f64]]) -> Result<usize> {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if n < 4 {
        return Err(Error::Config(format!(
            "diagnostics need at least 4 draws per chain, got {n}"
        )));
    }
    Ok(n)
}

/// Split-chain potential scale reduction factor, floored at 1. Chains are
/// trimmed to the shortest; the middle draw of odd-length chains is dropped.
/// Returns `(rhat, degenerate)`.
pub fn split_rhat(chains: &[&[f64]]) -> Result<(f64, bool)> {
    let n = check_lengths(chains)?;
    let half = n / 2;
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[n - half..n]])
        .collect();
    let within = halves.iter().map(|h| var(h)).sum::<f64>() / halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let between_over_n = var(&means);
    if within <= 0.0 {
        return Ok(if between_over_n <= 0.0 {
            (1.0, true)
        } else {
            (f64::INFINITY, true)
        });
    }
    let nh = half as f64;
    let var_plus = (nh - 1.0) / nh * within + between_over_n;
    Ok(((var_plus / within).sqrt().max(1.0), false))
}

/// Multi-chain effective sample size using Geyer's initial monotone
/// sequence on the combined autocorrelation estimate.
pub fn effective_sample_size(chains: &[&[f64]]) -> Result<f64> {
    let n = check_lengths(chains)?;
    let m = chains.len();
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let nf = n as f64;
    // biased autocovariance at lag t
    let acov = |c: usize, t: usize| -> f64 {
        let x = chains[c];
        let mu = means[c];
        (0..n - t)
            .map(|i| (x[i] - mu) * (x[i + t] - mu))
            .sum::<f64>()
            / nf
    };
    let acov0: Vec<f64> = (0..m).map(|c| acov(c, 0)).collect();
    let within = acov0.iter().sum::<f64>() / m as f64 * nf / (nf - 1.0);
    let between_over_n = if m > 1 { var(&means) } else { 0.0 };
    let var_plus = within * (nf - 1.0) / nf + between_over_n;
    if var_plus <= 0.0 {
        return Ok((m * n) as f64);
    }
    let rho = |t: usize| -> f64 {
        let mean_acov = if t == 0 {
            acov0.iter().sum::<f64>() / m as f64
        } else {
            (0..m).map(|c| acov(c, t)).sum::<f64>() / m as f64
        };
        1.0 - (within - mean_acov) / var_plus
    };

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let mut pair = rho(t) + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        if pair > prev_pair {
            pair = prev_pair;
        }
        tau += 2.0 * pair;
        prev_pair = pair;
        t += 2;
    }
    let total = (m * n) as f64;
    // Antithetic chains can push tau below 1/log10(total); cap as Stan does.
    let tau = tau.max(1.0 / total.log10());
    Ok(total / tau)
}

/// Split R-hat (when there are at least two chains) and ESS for every
/// parameter and derived quantity.
pub fn diagnostics(c: &ChainSet) -> Result<Vec<ParamDiagnostics>> {
    let names = c.param_names.iter().chain(c.derived_names.iter());
    names
        .map(|name| {
            let series = c.series(name).expect("name comes from the set");
            let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
            let ess = effective_sample_size(&refs)?;
            let (rhat, degenerate) = if refs.len() >= 2 {
                let (r, d) = split_rhat(&refs)?;
                (Some(r), d)
            } else {
                let (_, d) = split_rhat(&refs)?;
                (None, d)
            };
            Ok(ParamDiagnostics {
                name: name.clone(),
                rhat,
                ess,
                degenerate,
            })
        })
        .collect()
}
