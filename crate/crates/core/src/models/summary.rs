use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::{ChainSet, RHAT_WARNING};
use crate::stats::{mean, quantile_sorted, sorted};

/// Posterior summary of the RRT draws pooled over chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrtEstimate {
    pub model: String,
    pub bandwidth: f64,
    pub mean: f64,
    pub median: f64,
    /// Equal-tailed 95% interval.
    pub l95: f64,
    pub u95: f64,
    /// Share of draws `<= 0`.
    pub share_nonpositive: f64,
    pub max_rhat: Option<f64>,
    pub min_ess: Option<f64>,
    pub n1: usize,
    pub n0: usize,
    pub warnings: Vec<String>,
}

/// Intervals wider than this are reported as uninformative.
pub const WIDE_INTERVAL: f64 = 20.0;

pub fn summarize(
    c: &ChainSet,
    model: &str,
    bandwidth: f64,
    n1: usize,
    n0: usize,
) -> Result<RrtEstimate> {
    let draws = c
        .pooled("rrt")
        .ok_or_else(|| Error::Config("chain set has no `rrt` quantity".into()))?;
    if draws.is_empty() {
        return Err(Error::Config("no retained draws".into()));
    }
    if draws.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFiniteDraws("rrt".into()));
    }
    let s = sorted(&draws);
    let rrt_diag = c.diagnostic("rrt");
    let mut warnings = c.warnings.clone();
    if let Some(r) = c.max_rhat() {
        if r > RHAT_WARNING && warnings.is_empty() {
            warnings.push(format!("max R-hat {r:.3}"));
        }
    }
    let (l95, u95) = (quantile_sorted(&s, 0.025), quantile_sorted(&s, 0.975));
    if u95 - l95 > WIDE_INTERVAL {
        warnings.push(format!("wide interval ({:.1})", u95 - l95));
    }
    Ok(RrtEstimate {
        model: model.to_string(),
        bandwidth,
        mean: mean(&draws),
        median: quantile_sorted(&s, 0.5),
        l95,
        u95,
        share_nonpositive: draws.iter().filter(|d| **d <= 0.0).count() as f64 / draws.len() as f64,
        max_rhat: c.max_rhat(),
        min_ess: rrt_diag.map(|d| d.ess),
        n1,
        n0,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::Chain;

    fn set_with(draws: Vec<f64>) -> ChainSet {
        let n = draws.len();
        ChainSet {
            param_names: vec!["rrt".into()],
            derived_names: vec![],
            retained: n,
            chains: vec![Chain {
                draws,
                derived: vec![],
                acceptance: vec![0.4],
                burn_in_scales: vec![1.0],
                final_scales: vec![1.0],
            }],
            diagnostics: vec![],
            warnings: vec![],
        }
    }

    #[test]
    fn constant_draws() {
        let e = summarize(&set_with(vec![2.0; 100]), "pois.pois", 0.1, 5, 6).unwrap();
        assert_eq!((e.mean, e.median, e.l95, e.u95), (2.0, 2.0, 2.0, 2.0));
        assert_eq!(e.share_nonpositive, 0.0);
        assert_eq!((e.n1, e.n0), (5, 6));
    }

    #[test]
    fn interval_matches_order_statistics() {
        // independent oracle: type-7 interpolation written out on the order statistics
        let mut draws: Vec<f64> = (1..=1000).map(|i| i as f64 / 100.0).collect();
        draws.reverse();
        let e = summarize(&set_with(draws.clone()), "m", 0.1, 1, 1).unwrap();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| {
            let pos = p * 999.0;
            let i = pos as usize;
            draws[i] * (1.0 - (pos - i as f64)) + draws[i + 1] * (pos - i as f64)
        };
        assert!((e.l95 - q(0.025)).abs() < 1e-12);
        assert!((e.u95 - q(0.975)).abs() < 1e-12);
        assert!((e.median - 5.005).abs() < 1e-12);
        assert!((e.l95 - 0.01 - (10.0 - e.u95)).abs() < 1e-12);
    }

    #[test]
    fn counts_nonpositive_and_rejects_nan() {
        let e = summarize(&set_with(vec![-1.0, 0.0, 1.0, 2.0]), "m", 0.1, 1, 1).unwrap();
        assert_eq!(e.share_nonpositive, 0.5);
        assert!(matches!(
            summarize(&set_with(vec![1.0, f64::NAN]), "m", 0.1, 1, 1),
            Err(Error::NonFiniteDraws(_))
        ));
    }
}
