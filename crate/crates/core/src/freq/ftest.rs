use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::data::WindowedSample;
use crate::error::{Error, Result};

/// First-stage F-test of the threshold indicator on treatment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTestResult {
    /// `+inf` when the indicator predicts treatment perfectly.
    #[serde(with = "crate::serde_float")]
    pub f: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
}

/// Least-squares regression of `t` on an intercept and `z`; `F` is the
/// squared t-statistic of the `z` coefficient on `(1, n - 2)` degrees of
/// freedom.
pub fn first_stage_f(s: &WindowedSample) -> Result<FTestResult> {
    let n = s.len();
    if n < 3 {
        return Err(Error::Config(format!(
            "F-test needs at least 3 records, got {n}"
        )));
    }
    if s.n1 == 0 || s.n0 == 0 {
        return Err(Error::Numerical(
            "zero variance in the threshold indicator".into(),
        ));
    }
    let c = s.cell_counts();
    let (n1, n0) = (s.n1 as f64, s.n0 as f64);
    let (p1, p0) = (c.mean_t(true), c.mean_t(false));
    let ssr = n1 * p1 * (1.0 - p1) + n0 * p0 * (1.0 - p0);
    let df2 = n - 2;
    let jump = p1 - p0;
    let f = if ssr <= 0.0 {
        if jump == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        let sigma2 = ssr / df2 as f64;
        jump * jump / (sigma2 * (1.0 / n1 + 1.0 / n0))
    };
    let p_value = if f.is_infinite() {
        0.0
    } else {
        FisherSnedecor::new(1.0, df2 as f64)
            .map_err(|e| Error::Numerical(e.to_string()))?
            .sf(f)
            .clamp(0.0, 1.0)
    };
    Ok(FTestResult {
        f,
        df1: 1,
        df2,
        p_value,
    })
}
