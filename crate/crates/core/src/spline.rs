//! Weighted natural cubic smoothing splines (Reinsch form) with a
//! generalized cross-validation choice of the smoothing parameter.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fitted natural cubic spline: values and second derivatives at the knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSpline {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    pub second_derivs: Vec<f64>,
    pub lambda: f64,
    /// Generalized cross-validation score at `lambda`.
    pub gcv: f64,
}

struct Penalty {
    /// Q^T, (n-2) x n.
    qt: DMatrix<f64>,
    r: DMatrix<f64>,
    k: DMatrix<f64>,
}

fn penalty(knots: &[f64]) -> Result<Penalty> {
    let n = knots.len();
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    if h.iter().any(|&d| d <= 0.0 || !d.is_finite()) {
        return Err(Error::Numerical(
            "spline knots must be strictly increasing".into(),
        ));
    }
    let m = n - 2;
    let mut qt = DMatrix::zeros(m, n);
    let mut r = DMatrix::zeros(m, m);
    for j in 0..m {
        // interior knot j + 1
        qt[(j, j)] = 1.0 / h[j];
        qt[(j, j + 1)] = -1.0 / h[j] - 1.0 / h[j + 1];
        qt[(j, j + 2)] = 1.0 / h[j + 1];
        r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
        if j + 1 < m {
            r[(j, j + 1)] = h[j + 1] / 6.0;
            r[(j + 1, j)] = h[j + 1] / 6.0;
        }
    }
    let r_inv_qt = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("spline band matrix not positive definite".into()))?
        .solve(&qt);
    let k = qt.transpose() * r_inv_qt;
    Ok(Penalty { qt, r, k })
}

struct Solution {
    values: DVector<f64>,
    gcv: f64,
}

fn solve(p: &Penalty, y: &DVector<f64>, w: &DVector<f64>, lambda: f64) -> Option<Solution> {
    let n = y.len();
    let wmat = DMatrix::from_diagonal(w);
    let lhs = &wmat + &p.k * lambda;
    let lu = lhs.lu();
    let hat = lu.solve(&wmat)?;
    let values = &hat * y;
    let total_w: f64 = w.sum();
    let rss: f64 = (0..n)
        .map(|i| w[i] * (y[i] - values[i]).powi(2))
        .sum::<f64>()
        / total_w;
    let dof = 1.0 - hat.trace() / n as f64;
    let gcv = if dof > 1e-12 {
        rss / (dof * dof)
    } else {
        f64::INFINITY
    };
    Some(Solution { values, gcv })
}

impl SmoothingSpline {
    /// Fits `min sum w_i (y_i - g(x_i))^2 + lambda * int g''^2`. With
    /// `lambda = None` the smoothing parameter minimizes the GCV score.
    /// Needs at least three distinct, increasing knots.
    pub fn fit(x: &[f64], y: &[f64], weights: &[f64], lambda: Option<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n || weights.len() != n {
            return Err(Error::Numerical(
                "smoothing spline needs at least 3 points with matching weights".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Numerical("spline weights must be positive".into()));
        }
        let p = penalty(x)?;
        let yv = DVector::from_column_slice(y);
        let wv = DVector::from_column_slice(weights);

        let (lambda, sol) = match lambda {
            Some(l) if l >= 0.0 && l.is_finite() => {
                let s = solve(&p, &yv, &wv, l)
                    .ok_or_else(|| Error::Numerical("singular spline system".into()))?;
                (l, s)
            }
            Some(l) => return Err(Error::Config(format!("invalid spline stiffness {l}"))),
            None => gcv_search(&p, &yv, &wv)?,
        };

        let gamma_inner =
            p.r.clone()
                .cholesky()
                .expect("checked in penalty()")
                .solve(&(&p.qt * &sol.values));
        let mut second_derivs = vec![0.0; n];
        second_derivs[1..n - 1].copy_from_slice(gamma_inner.as_slice());

        Ok(Self {
            knots: x.to_vec(),
            values: sol.values.iter().copied().collect(),
            second_derivs,
            lambda,
            gcv: sol.gcv,
        })
    }

    /// Evaluates the spline; linear beyond the outer knots.
    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        let g = &self.values;
        let c = &self.second_derivs;
        let n = k.len();
        if t <= k[0] {
            let h = k[1] - k[0];
            let slope = (g[1] - g[0]) / h - h * c[1] / 6.0;
            return g[0] + slope * (t - k[0]);
        }
        if t >= k[n - 1] {
            let h = k[n - 1] - k[n - 2];
            let slope = (g[n - 1] - g[n - 2]) / h + h * c[n - 2] / 6.0;
            return g[n - 1] + slope * (t - k[n - 1]);
        }
        let i = k.partition_point(|&v| v <= t).saturating_sub(1).min(n - 2);
        let h = k[i + 1] - k[i];
        let a = t - k[i];
        let b = k[i + 1] - t;
        (a * g[i + 1] + b * g[i]) / h
            - a * b / 6.0 * ((1.0 + a / h) * c[i + 1] + (1.0 + b / h) * c[i])
    }
}

fn gcv_search(p: &Penalty, y: &DVector<f64>, w: &DVector<f64>) -> Result<(f64, Solution)> {
    // Coarse log-grid, then golden-section refinement around the best point.
    let score = |log_l: f64| solve(p, y, w, 10f64.powf(log_l)).map(|s| s.gcv);
    let grid: Vec<f64> = (0..=80).map(|i| -14.0 + 0.25 * i as f64).collect();
    let mut best = (f64::INFINITY, grid[0]);
    for &g in &grid {
        if let Some(s) = score(g) {
            if s < best.0 {
                best = (s, g);
            }
        }
    }
    if !best.0.is_finite() {
        // Interpolating fit everywhere (e.g. exact data); take the stiffest.
        best.1 = *grid.last().unwrap();
    } else {
        let (mut lo, mut hi) = (best.1 - 0.25, best.1 + 0.25);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..40 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            let fa = score(a).unwrap_or(f64::INFINITY);
            let fb = score(b).unwrap_or(f64::INFINITY);
            if fa <= fb {
                hi = b;
            } else {
                lo = a;
            }
        }
        let mid = 0.5 * (lo + hi);
        if score(mid).unwrap_or(f64::INFINITY) < best.0 {
            best.1 = mid;
        }
    }
    let lambda = 10f64.powf(best.1);
    let sol =
        solve(p, y, w, lambda).ok_or_else(|| Error::Numerical("singular spline system".into()))?;
    Ok((lambda, sol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lambda_interpolates() {
        let x = [0.0, 0.1, 0.25, 0.3, 0.5];
        let y = [1.0, 0.2, -0.4, 0.9, 0.3];
        let s = SmoothingSpline::fit(&x, &y, &[1.0; 5], Some(0.0)).unwrap();
        for (xi, yi) in x.iter().zip(y) {
            assert!((s.eval(*xi) - yi).abs() < 1e-9);
        }
        assert_eq!(s.second_derivs[0], 0.0);
        assert_eq!(s.second_derivs[4], 0.0);
    }

    #[test]
    fn interpolant_is_c2_at_interior_knots() {
        let x = [0.0, 1.0, 2.5, 3.0, 4.0, 6.0];
        let y = [0.0, 1.0, 0.0, 2.0, 1.0, 1.5];
        let s = SmoothingSpline::fit(&x, &y, &[1.0; 6], Some(0.0)).unwrap();
        let eps = 1e-6;
        for &k in &x[1..5] {
            let left = (s.eval(k - eps) - s.eval(k - 2.0 * eps)) / eps;
            let right = (s.eval(k + 2.0 * eps) - s.eval(k + eps)) / eps;
            assert!((left - right).abs() < 1e-4, "slope jump at {k}");
        }
    }

    #[test]
    fn huge_lambda_gives_weighted_least_squares_line() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.1, 0.9, 2.2, 2.8, 4.1];
        let w = [1.0, 2.0, 1.0, 3.0, 1.0];
        let s = SmoothingSpline::fit(&x, &y, &w, Some(1e9)).unwrap();
        // weighted least squares oracle
        let sw: f64 = w.iter().sum();
        let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
        let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
        let sxy: f64 = (0..5).map(|i| w[i] * (x[i] - mx) * (y[i] - my)).sum();
        let sxx: f64 = (0..5).map(|i| w[i] * (x[i] - mx).powi(2)).sum();
        let slope = sxy / sxx;
        for xi in [0.0, 1.5, 4.0, 5.0] {
            let line = my + slope * (xi - mx);
            assert!(
                (s.eval(xi) - line).abs() < 1e-5,
                "{} vs {}",
                s.eval(xi),
                line
            );
        }
    }

    #[test]
    fn constant_data_stays_constant_under_gcv() {
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.01).collect();
        let s = SmoothingSpline::fit(&x, &[1.0; 8], &[3.0; 8], None).unwrap();
        for i in 0..50 {
            assert!((s.eval(i as f64 * 0.0015) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gcv_smooths_noisy_quadratic() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let noise = [0.3, -0.2, 0.1, -0.35, 0.25, -0.1];
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| v * v + 0.1 * noise[i % noise.len()])
            .collect();
        let s = SmoothingSpline::fit(&x, &y, &[1.0; 30], None).unwrap();
        assert!(s.lambda > 1e-12);
        let err: f64 = x.iter().map(|v| (s.eval(*v) - v * v).powi(2)).sum::<f64>() / 30.0;
        let raw: f64 = x
            .iter()
            .zip(&y)
            .map(|(v, yy)| (yy - v * v).powi(2))
            .sum::<f64>()
            / 30.0;
        assert!(err < raw);
    }
}
