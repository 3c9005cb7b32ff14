//! Balke-Pearl bounds on the average causal risk difference with a binary
//! instrument, treatment and outcome.

use serde::{Deserialize, Serialize};

use crate::data::{CellCounts, WindowedSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsResult {
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    /// `max_t sum_y max_z P(y, t | z) <= 1`. When violated the data are
    /// incompatible with a valid instrument and the bounds may cross.
    pub instrument_inequality_holds: bool,
}

/// Bounds from the joint probabilities `p[z][y][t] = P(Y=y, T=t | Z=z)`.
pub fn bounds_from_probs(p: &[[[f64; 2]; 2]; 2]) -> BoundsResult {
    // p(y, t, z) following the usual `p_{yt.z}` notation
    let q = |y: usize, t: usize, z: usize| p[z][y][t];
    let lower = [
        q(1, 1, 1) + q(0, 0, 0) - 1.0,
        q(1, 1, 0) + q(0, 0, 1) - 1.0,
        q(1, 1, 0) - q(1, 1, 1) - q(1, 0, 1) - q(0, 1, 0) - q(1, 0, 0),
        q(1, 1, 1) - q(1, 1, 0) - q(1, 0, 0) - q(0, 1, 1) - q(1, 0, 1),
        -q(0, 1, 1) - q(1, 0, 1),
        -q(0, 1, 0) - q(1, 0, 0),
        q(0, 0, 1) - q(0, 1, 1) - q(1, 0, 1) - q(0, 1, 0) - q(0, 0, 0),
        q(0, 0, 0) - q(0, 1, 0) - q(1, 0, 0) - q(0, 1, 1) - q(0, 0, 1),
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    let upper = [
        1.0 - q(0, 1, 1) - q(1, 0, 0),
        1.0 - q(0, 1, 0) - q(1, 0, 1),
        -q(0, 1, 0) + q(0, 1, 1) + q(0, 0, 1) + q(1, 1, 0) + q(0, 0, 0),
        -q(0, 1, 1) + q(1, 1, 1) + q(0, 0, 1) + q(0, 1, 0) + q(0, 0, 0),
        q(1, 1, 1) + q(0, 0, 1),
        q(1, 1, 0) + q(0, 0, 0),
        -q(1, 0, 1) + q(1, 1, 1) + q(0, 0, 1) + q(1, 1, 0) + q(1, 0, 0),
        -q(1, 0, 0) + q(1, 1, 0) + q(0, 0, 0) + q(1, 1, 1) + q(1, 0, 1),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);

    let inequality = (0..2).all(|t| {
        let s: f64 = (0..2).map(|y| q(y, t, 0).max(q(y, t, 1))).sum();
        s <= 1.0 + 1e-12
    });
    BoundsResult {
        lower,
        upper,
        width: upper - lower,
        instrument_inequality_holds: inequality,
    }
}

pub fn bounds_from_counts(c: &CellCounts) -> BoundsResult {
    let p = std::array::from_fn(|z| {
        std::array::from_fn(|y| std::array::from_fn(|t| c.prob(z == 1, y == 1, t == 1)))
    });
    bounds_from_probs(&p)
}

pub fn balke_pearl_bounds(s: &WindowedSample) -> BoundsResult {
    bounds_from_counts(&s.cell_counts())
}
