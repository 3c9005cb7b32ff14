//! Per-arm summaries that make every Poisson/Binomial log-likelihood in the
//! model family O(1) in the number of records.
//!
//! The only non-linear data term is `sum_i exp(b * x_i)`. For the centred
//! scores inside a bandwidth `|b * x_i|` stays small, so it is evaluated from
//! the power moments `sum_i x_i^k / k!` by Horner's rule; larger arguments
//! fall back to the direct sum.

use serde::{Deserialize, Serialize};

use crate::data::WindowedSample;

const SERIES_TERMS: usize = 30;
/// Largest `|b| * max|x|` evaluated by series.
const SERIES_RADIUS: f64 = 3.0;

/// `b -> sum_i exp(b * x_i)` over a fixed set of scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpSum {
    xs: Vec<f64>,
    /// `sum_i x_i^k / k!` for `k = 0..SERIES_TERMS`.
    moments: Vec<f64>,
    max_abs: f64,
}

impl ExpSum {
    pub fn new(xs: Vec<f64>) -> Self {
        let mut moments = vec![0.0; SERIES_TERMS];
        for &x in &xs {
            let mut term = 1.0;
            for (k, m) in moments.iter_mut().enumerate() {
                if k > 0 {
                    term *= x / k as f64;
                }
                *m += term;
            }
        }
        let max_abs = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        Self {
            xs,
            moments,
            max_abs,
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Population standard deviation of the scores.
    pub fn std_dev(&self) -> f64 {
        if self.xs.is_empty() {
            return 0.0;
        }
        let n = self.xs.len() as f64;
        let m = self.moments[1] / n;
        (2.0 * self.moments[2] / n - m * m).max(0.0).sqrt()
    }

    pub fn eval(&self, b: f64) -> f64 {
        if (b * self.max_abs).abs() <= SERIES_RADIUS {
            self.moments.iter().rev().fold(0.0, |acc, m| acc * b + m)
        } else {
            self.xs.iter().map(|x| (b * x).exp()).sum()
        }
    }
}

/// Sufficient statistics for one side of the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub n: usize,
    /// `sum y`, `sum y x*`.
    pub sum_y: f64,
    pub sum_y_x: f64,
    /// `sum y tbar`, `sum y tbar x*`.
    pub sum_ytbar: f64,
    pub sum_ytbar_x: f64,
    /// Number of untreated records.
    pub n_tbar: usize,
    pub exp_all: ExpSum,
    /// Treated (`tbar = 0`) and untreated (`tbar = 1`) records.
    pub exp_treated: ExpSum,
    pub exp_untreated: ExpSum,
}

impl ArmStats {
    pub fn from_sample(s: &WindowedSample, z: bool) -> Self {
        let arm: Vec<_> = s.arm(z).collect();
        let f = |b: bool| b as u8 as f64;
        Self {
            n: arm.len(),
            sum_y: arm.iter().map(|r| f(r.y)).sum(),
            sum_y_x: arm.iter().map(|r| f(r.y) * r.x_star).sum(),
            sum_ytbar: arm.iter().map(|r| f(r.y_tbar())).sum(),
            sum_ytbar_x: arm.iter().map(|r| f(r.y_tbar()) * r.x_star).sum(),
            n_tbar: arm.iter().filter(|r| !r.t).count(),
            exp_all: ExpSum::new(arm.iter().map(|r| r.x_star).collect()),
            exp_treated: ExpSum::new(arm.iter().filter(|r| r.t).map(|r| r.x_star).collect()),
            exp_untreated: ExpSum::new(arm.iter().filter(|r| !r.t).map(|r| r.x_star).collect()),
        }
    }

    pub fn mean_y(&self) -> f64 {
        self.sum_y / self.n as f64
    }

    pub fn mean_ytbar(&self) -> f64 {
        self.sum_ytbar / self.n as f64
    }
}
