//! Method-of-moments estimator of the multiplicative structural mean model.
//!
//! With a binary instrument the two sample moment conditions
//!
//! ```text
//! E_n[ Y exp(-psi T) - alpha0 ]     = 0
//! E_n[(Y exp(-psi T) - alpha0) Z ]  = 0
//! ```
//!
//! are exactly identified. Profiling `alpha0` out leaves
//! `E_n[Y exp(-psi T) | Z=1] = E_n[Y exp(-psi T) | Z=0]`, solved for `psi` by
//! Brent's method on [`PSI_BRACKET`]. The risk ratio is `exp(psi)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::root::brent;
use crate::data::{CellCounts, WindowedSample};
use crate::error::{Error, Result};
use crate::stats::{quantile_sorted, sorted};

pub const DEFAULT_BOOTSTRAP: usize = 2_000;
pub const PSI_BRACKET: (f64, f64) = (-20.0, 20.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmPoint {
    pub alpha0: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub alpha0: f64,
    /// Log risk ratio.
    pub psi: f64,
    pub rrt: f64,
    /// Percentile bootstrap interval; absent when no replicate succeeded.
    pub l95: Option<f64>,
    pub u95: Option<f64>,
    pub bootstrap: usize,
    /// Replicates without a root, excluded from the interval.
    pub bootstrap_failed: usize,
    pub converged: bool,
}

/// `E_n[Y exp(-psi T) | Z = z]` from cell counts.
fn arm_moment(c: &CellCounts, z: bool, psi: f64) -> f64 {
    (c.count(z, true, false) as f64 + c.count(z, true, true) as f64 * (-psi).exp()) / c.n(z) as f64
}

/// Solves the sample moment equations.
pub fn gmm_point(c: &CellCounts) -> Result<GmmPoint> {
    if c.n(true) == 0 || c.n(false) == 0 {
        return Err(Error::EmptyArm);
    }
    let g = |psi: f64| arm_moment(c, true, psi) - arm_moment(c, false, psi);
    let psi = brent(g, PSI_BRACKET.0, PSI_BRACKET.1, 1e-15).map_err(|_| {
        Error::NonIdentified(format!(
            "moment equation has no root for psi in [{}, {}]",
            PSI_BRACKET.0, PSI_BRACKET.1
        ))
    })?;
    let n = (c.n(true) + c.n(false)) as f64;
    let alpha0 = (arm_moment(c, true, psi) * c.n(true) as f64
        + arm_moment(c, false, psi) * c.n(false) as f64)
        / n;
    Ok(GmmPoint { alpha0, psi })
}

/// Redraws the four `(y, t)` cells of one arm. The estimator depends on the
/// records only through these counts, so a multinomial draw is exactly a
/// with-replacement resample of the arm's records.
fn resample_arm(c: &CellCounts, z: bool, rng: &mut ChaCha8Rng) -> [[u64; 2]; 2] {
    let n = c.n(z);
    let cells = [(false, false), (false, true), (true, false), (true, true)];
    let mut out = [[0u64; 2]; 2];
    let mut remaining = n;
    let mut mass_left = n;
    for &(y, t) in &cells {
        let observed = c.count(z, y, t);
        let k = if observed == 0 || remaining == 0 {
            0
        } else if observed == mass_left {
            remaining
        } else {
            let p = observed as f64 / mass_left as f64;
            Binomial::new(remaining, p)
                .expect("valid binomial")
                .sample(rng)
        };
        out[y as usize][t as usize] = k;
        remaining -= k;
        mass_left -= observed;
    }
    out
}

/// Point estimate plus a percentile interval from `replicates` bootstrap
/// resamples drawn within each arm (so `n1` and `n0` are preserved).
/// Replicate `b` uses ChaCha stream `(seed, b)`.
pub fn gmm_msmm(s: &WindowedSample, replicates: usize, seed: u64) -> Result<GmmFit> {
    let counts = s.cell_counts();
    if counts.mean_y_tbar(true) == counts.mean_y_tbar(false) {
        return Err(Error::NonIdentified(
            "zero denominator: E(Y(1-T)|Z) equal in both arms".into(),
        ));
    }
    let point = gmm_point(&counts)?;

    let boot: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let resampled = CellCounts {
                counts: [
                    resample_arm(&counts, false, &mut rng),
                    resample_arm(&counts, true, &mut rng),
                ],
            };
            gmm_point(&resampled).ok().map(|p| p.psi.exp())
        })
        .collect();
    let ok: Vec<f64> = boot.iter().flatten().copied().collect();
    let failed = replicates - ok.len();
    let (l95, u95) = if ok.is_empty() {
        (None, None)
    } else {
        let s = sorted(&ok);
        (
            Some(quantile_sorted(&s, 0.025)),
            Some(quantile_sorted(&s, 0.975)),
        )
    };
    Ok(GmmFit {
        alpha0: point.alpha0,
        psi: point.psi,
        rrt: point.psi.exp(),
        l95,
        u95,
        bootstrap: replicates,
        bootstrap_failed: failed,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::plug_in_rrt;

    fn counts(arm1: [[u64; 2]; 2], arm0: [[u64; 2]; 2]) -> CellCounts {
        CellCounts {
            counts: [arm0, arm1],
        }
    }

    #[test]
    fn sharp_design_gives_plain_risk_ratio() {
        // z=1: all treated, 40% events; z=0: all untreated, 20% events
        let c = counts([[0, 60], [0, 40]], [[80, 0], [20, 0]]);
        let p = gmm_point(&c).unwrap();
        assert!((p.psi.exp() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_plug_in_formula() {
        let c = counts([[300, 460], [40, 200]], [[700, 100], [150, 50]]);
        let p = gmm_point(&c).unwrap();
        let plug = plug_in_rrt(&c).unwrap();
        assert!((p.psi.exp() - plug).abs() < 1e-12 * plug.max(1.0));
        // the moment conditions hold at the solution
        let n = 2000.0;
        let m = |z: bool| arm_moment(&c, z, p.psi) * c.n(z) as f64;
        assert!(((m(true) + m(false)) / n - p.alpha0).abs() < 1e-15);
        assert!((m(true) / 1000.0 - p.alpha0).abs() < 1e-12);
    }

    #[test]
    fn negative_plug_in_has_no_root() {
        // plug-in ratio 1 - 0.3/0.1 = -2
        let c = counts([[400, 400], [100, 100]], [[800, 100], [50, 50]]);
        assert!(plug_in_rrt(&c).unwrap() < 0.0);
        assert!(matches!(gmm_point(&c), Err(Error::NonIdentified(_))));
    }

    #[test]
    fn resampling_preserves_arm_sizes() {
        let c = counts([[3, 5], [0, 2]], [[10, 1], [4, 0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = resample_arm(&c, true, &mut rng);
            assert_eq!(a.iter().flatten().sum::<u64>(), 10);
            // empty cells stay empty
            assert_eq!(a[1][0], 0);
            let b = resample_arm(&c, false, &mut rng);
            assert_eq!(b.iter().flatten().sum::<u64>(), 15);
            assert_eq!(b[1][1], 0);
        }
    }
}
