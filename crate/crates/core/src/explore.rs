//! Binned outcome and treatment means around the threshold, with separate
//! smoothing-spline fits on either side so a discontinuity stays visible.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::Observation;
use crate::error::{Error, Result};
use crate::spline::SmoothingSpline;

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_GRID_POINTS: usize = 51;
/// A side needs this many non-empty bins before a spline is fitted.
pub const MIN_SPLINE_BINS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreOptions {
    pub lower: f64,
    pub upper: f64,
    pub threshold: f64,
    pub bins: usize,
    /// Spline smoothing parameter; `None` selects it by GCV.
    pub stiffness: Option<f64>,
    pub grid_points: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        Self {
            lower: 0.1,
            upper: 0.3,
            threshold: crate::data::DEFAULT_THRESHOLD,
            bins: DEFAULT_BINS,
            stiffness: None,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub mid: f64,
    pub n: usize,
    pub mean_y: Option<f64>,
    pub mean_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideFit {
    pub outcome: Option<Curve>,
    pub treatment: Option<Curve>,
    /// Set when the side had too few populated bins for a spline.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedSummary {
    pub edges: Vec<f64>,
    pub bins: Vec<Bin>,
    pub below: SideFit,
    pub above: SideFit,
}

impl BinnedSummary {
    /// Writes `bin_mid,mean_y,mean_t,n`; empty bins leave the means blank.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_mid", "mean_y", "mean_t", "n"])?;
        let fmt = |v: Option<f64>| v.map(|m| m.to_string()).unwrap_or_default();
        for b in &self.bins {
            w.write_record([
                b.mid.to_string(),
                fmt(b.mean_y),
                fmt(b.mean_t),
                b.n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Count-weighted mean outcome over all bins.
    pub fn pooled_mean_y(&self) -> f64 {
        let n: usize = self.bins.iter().map(|b| b.n).sum();
        self.bins
            .iter()
            .filter_map(|b| b.mean_y.map(|m| m * b.n as f64))
            .sum::<f64>()
            / n as f64
    }
}

fn bin_index(x: f64, edges: &[f64]) -> Option<usize> {
    let k = edges.len() - 1;
    if x < edges[0] || x > edges[k] {
        return None;
    }
    let width = (edges[k] - edges[0]) / k as f64;
    let mut i = (((x - edges[0]) / width).floor() as usize).min(k - 1);
    while i > 0 && x < edges[i] {
        i -= 1;
    }
    while i + 1 < k && x >= edges[i + 1] {
        i += 1;
    }
    Some(i)
}

fn fit_side(bins: &[&Bin], from: f64, to: f64, opts: &ExploreOptions) -> Result<SideFit> {
    let populated: Vec<&&Bin> = bins.iter().filter(|b| b.n > 0).collect();
    if populated.len() < MIN_SPLINE_BINS {
        return Ok(SideFit {
            outcome: None,
            treatment: None,
            warning: Some(format!(
                "only {} populated bins; spline omitted",
                populated.len()
            )),
        });
    }
    let x: Vec<f64> = populated.iter().map(|b| b.mid).collect();
    let w: Vec<f64> = populated.iter().map(|b| b.n as f64).collect();
    let m = opts.grid_points.max(2);
    let grid: Vec<f64> = (0..m)
        .map(|i| from + (to - from) * i as f64 / (m - 1) as f64)
        .collect();
    let curve = |means: Vec<f64>| -> Result<Curve> {
        let s = SmoothingSpline::fit(&x, &means, &w, opts.stiffness)?;
        Ok(Curve {
            value: grid.iter().map(|&g| s.eval(g)).collect(),
            x: grid.clone(),
            lambda: s.lambda,
        })
    };
    Ok(SideFit {
        outcome: Some(curve(
            populated.iter().map(|b| b.mean_y.unwrap()).collect(),
        )?),
        treatment: Some(curve(
            populated.iter().map(|b| b.mean_t.unwrap()).collect(),
        )?),
        warning: None,
    })
}

/// Equal-width bins over `[lower, upper]`; observations outside the range are
/// ignored. A bin belongs to the side of the threshold its midpoint lies on.
pub fn explore(data: &[Observation], opts: &ExploreOptions) -> Result<BinnedSummary> {
    if opts.bins < 2 {
        return Err(Error::Config("at least 2 bins required".into()));
    }
    if !(opts.lower < opts.threshold && opts.threshold < opts.upper) {
        return Err(Error::Config(format!(
            "range [{}, {}] must contain the threshold {}",
            opts.lower, opts.upper, opts.threshold
        )));
    }
    let k = opts.bins;
    let width = (opts.upper - opts.lower) / k as f64;
    let mut edges: Vec<f64> = (0..=k).map(|i| opts.lower + width * i as f64).collect();
    edges[k] = opts.upper;

    let mut n = vec![0usize; k];
    let mut ys = vec![0usize; k];
    let mut ts = vec![0usize; k];
    for o in data {
        if let Some(i) = bin_index(o.x, &edges) {
            n[i] += 1;
            ys[i] += o.y as usize;
            ts[i] += o.t as usize;
        }
    }
    let bins: Vec<Bin> = (0..k)
        .map(|i| {
            let mean = |c: usize| (n[i] > 0).then(|| c as f64 / n[i] as f64);
            Bin {
                lower: edges[i],
                upper: edges[i + 1],
                mid: 0.5 * (edges[i] + edges[i + 1]),
                n: n[i],
                mean_y: mean(ys[i]),
                mean_t: mean(ts[i]),
            }
        })
        .collect();

    let below: Vec<&Bin> = bins.iter().filter(|b| b.mid < opts.threshold).collect();
    let above: Vec<&Bin> = bins.iter().filter(|b| b.mid >= opts.threshold).collect();
    Ok(BinnedSummary {
        below: fit_side(&below, opts.lower, opts.threshold, opts)?,
        above: fit_side(&above, opts.threshold, opts.upper, opts)?,
        edges,
        bins,
    })
}
