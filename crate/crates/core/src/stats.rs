//! Small numeric helpers shared by the estimators.

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `ln(1 + e^a)` without overflow.
pub fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

pub fn expit(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64 / 100.0).collect();
        // h = 999 * 0.025 = 24.975 -> v[24] + 0.975 * (v[25] - v[24])
        assert!((quantile_sorted(&v, 0.025) - 0.25975).abs() < 1e-12);
        assert!((quantile_sorted(&v, 0.975) - 9.75025).abs() < 1e-12);
        assert_eq!(quantile_sorted(&v, 0.0), 0.01);
        assert_eq!(quantile_sorted(&v, 1.0), 10.0);
        assert_eq!(quantile_sorted(&[4.0], 0.3), 4.0);
    }

    #[test]
    fn logistic_helpers() {
        assert!((expit(-3.0) - 0.047425873177566774).abs() < 1e-15);
        assert!((expit(logit(0.3)) - 0.3).abs() < 1e-15);
        assert!((softplus(2.0) - (1.0 + 2f64.exp()).ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }
}
