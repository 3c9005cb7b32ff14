//! Observations, threshold windowing and the plug-in risk ratio for the treated.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold on the risk-score scale.
pub const DEFAULT_THRESHOLD: f64 = 0.2;

/// Bandwidths used throughout the analysis and simulation study.
pub const DEFAULT_BANDWIDTHS: [f64; 4] = [0.025, 0.05, 0.075, 0.1];

/// One record: risk score, treatment indicator, binary outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: f64,
    pub t: bool,
    pub y: bool,
}

impl Observation {
    pub fn new(x: f64, t: bool, y: bool) -> Result<Self> {
        if !x.is_finite() || !(0.0..=1.0).contains(&x) {
            return Err(Error::Config(format!("risk score {x} outside [0,1]")));
        }
        Ok(Self { x, t, y })
    }
}

/// Column names used when reading delimited input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub x: String,
    pub t: String,
    pub y: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            x: "x".into(),
            t: "t".into(),
            y: "y".into(),
        }
    }
}

fn malformed(row: usize, column: &str, message: &str) -> Error {
    Error::MalformedRow {
        row,
        column: column.to_string(),
        message: message.to_string(),
    }
}

fn parse_binary(raw: &str, row: usize, column: &str) -> Result<bool> {
    match raw.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => match other.parse::<f64>() {
            Ok(v) if v == 0.0 || v == 1.0 => Ok(v == 1.0),
            _ => Err(malformed(row, column, "must be 0/1")),
        },
    }
}

/// Reads comma-separated records with a header row. Rows are numbered from 1
/// (the first data row) in error messages.
pub fn load_dataset<R: Read>(source: R, columns: &ColumnMap) -> Result<Vec<Observation>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (ix, it, iy) = (find(&columns.x)?, find(&columns.t)?, find(&columns.y)?);

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |idx: usize, name: &str| {
            record
                .get(idx)
                .ok_or_else(|| malformed(row, name, "is missing"))
        };
        let x: f64 = field(ix, &columns.x)?
            .parse()
            .map_err(|_| malformed(row, &columns.x, "is not a number"))?;
        if !x.is_finite() || !(0.0..=1.0).contains(&x) {
            return Err(malformed(row, &columns.x, "must be in [0,1]"));
        }
        let t = parse_binary(field(it, &columns.t)?, row, &columns.t)?;
        let y = parse_binary(field(iy, &columns.y)?, row, &columns.y)?;
        out.push(Observation { x, t, y });
    }
    if out.is_empty() {
        return Err(Error::NoObservations);
    }
    Ok(out)
}

/// Symmetric analysis window `[x0 - h, x0 + h]` around the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub threshold: f64,
    pub bandwidth: f64,
}

impl Window {
    /// The window must lie inside `[0, 1]`; it is never clamped.
    pub fn new(threshold: f64, bandwidth: f64) -> Result<Self> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::InvalidWindow(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if !threshold.is_finite() || threshold - bandwidth < 0.0 || threshold + bandwidth > 1.0 {
            return Err(Error::InvalidWindow(format!(
                "[{}, {}] is not inside [0,1]",
                threshold - bandwidth,
                threshold + bandwidth
            )));
        }
        Ok(Self {
            threshold,
            bandwidth,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowedRecord {
    /// Original risk score.
    pub x: f64,
    /// Risk score centred at the threshold.
    pub x_star: f64,
    /// Above-threshold indicator.
    pub z: bool,
    pub t: bool,
    pub y: bool,
}

impl WindowedRecord {
    /// Outcome among the untreated: `y * (1 - t)`.
    pub fn y_tbar(&self) -> bool {
        self.y && !self.t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedSample {
    pub window: Window,
    pub records: Vec<WindowedRecord>,
    pub n1: usize,
    pub n0: usize,
}

impl WindowedSample {
    pub fn arm(&self, z: bool) -> impl Iterator<Item = &WindowedRecord> {
        self.records.iter().filter(move |r| r.z == z)
    }

    pub fn n(&self, z: bool) -> usize {
        if z {
            self.n1
        } else {
            self.n0
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_observations(&self) -> Vec<Observation> {
        self.records
            .iter()
            .map(|r| Observation {
                x: r.x,
                t: r.t,
                y: r.y,
            })
            .collect()
    }

    pub fn cell_counts(&self) -> CellCounts {
        CellCounts::from_records(&self.records)
    }
}

/// Keeps observations with `|x - x0| <= h`; ties at the threshold go above.
pub fn window(data: &[Observation], w: &Window) -> Result<WindowedSample> {
    let records: Vec<WindowedRecord> = data
        .iter()
        .filter(|o| (o.x - w.threshold).abs() <= w.bandwidth)
        .map(|o| WindowedRecord {
            x: o.x,
            x_star: o.x - w.threshold,
            z: o.x >= w.threshold,
            t: o.t,
            y: o.y,
        })
        .collect();
    let n1 = records.iter().filter(|r| r.z).count();
    let n0 = records.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::EmptyArm);
    }
    Ok(WindowedSample {
        window: *w,
        records,
        n1,
        n0,
    })
}

/// Joint counts of `(y, t)` in each arm, indexed `[z][y][t]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub counts: [[[u64; 2]; 2]; 2],
}

impl CellCounts {
    pub fn from_records(records: &[WindowedRecord]) -> Self {
        let mut counts = [[[0u64; 2]; 2]; 2];
        for r in records {
            counts[r.z as usize][r.y as usize][r.t as usize] += 1;
        }
        Self { counts }
    }

    pub fn n(&self, z: bool) -> u64 {
        self.counts[z as usize].iter().flatten().sum()
    }

    pub fn count(&self, z: bool, y: bool, t: bool) -> u64 {
        self.counts[z as usize][y as usize][t as usize]
    }

    /// `P(Y = y, T = t | Z = z)`.
    pub fn prob(&self, z: bool, y: bool, t: bool) -> f64 {
        self.count(z, y, t) as f64 / self.n(z) as f64
    }

    pub fn mean_y(&self, z: bool) -> f64 {
        self.prob(z, true, false) + self.prob(z, true, true)
    }

    pub fn mean_t(&self, z: bool) -> f64 {
        self.prob(z, false, true) + self.prob(z, true, true)
    }

    pub fn mean_y_tbar(&self, z: bool) -> f64 {
        self.prob(z, true, false)
    }

    pub fn mean_y_t(&self, z: bool) -> f64 {
        self.prob(z, true, true)
    }
}

/// `1 - [E(Y|Z=1) - E(Y|Z=0)] / [E(Y(1-T)|Z=1) - E(Y(1-T)|Z=0)]`.
///
/// Negative values are returned unchanged: nothing in the ratio keeps it
/// positive in finite samples.
pub fn plug_in_rrt(c: &CellCounts) -> Result<f64> {
    if c.n(true) == 0 || c.n(false) == 0 {
        return Err(Error::EmptyArm);
    }
    plug_in_from_means(
        c.mean_y(true),
        c.mean_y(false),
        c.mean_y_tbar(true),
        c.mean_y_tbar(false),
    )
}

/// The same ratio from the four arm means directly.
pub fn plug_in_from_means(y1: f64, y0: f64, ytbar1: f64, ytbar0: f64) -> Result<f64> {
    let denominator = ytbar1 - ytbar0;
    if denominator == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(1.0 - (y1 - y0) / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(x: f64, t: u8, y: u8) -> Observation {
        Observation::new(x, t == 1, y == 1).unwrap()
    }

    #[test]
    fn parses_simple_csv() {
        let data = load_dataset(
            "x,t,y\n0.21,1,0\n0.18,0,1".as_bytes(),
            &ColumnMap::default(),
        )
        .unwrap();
        assert_eq!(data, vec![obs(0.21, 1, 0), obs(0.18, 0, 1)]);
    }

    #[test]
    fn rejects_non_binary_treatment_with_row_number() {
        let err = load_dataset(
            "x,t,y\n0.21,1,0\n0.18,0,1\n0.3,2,1\n".as_bytes(),
            &ColumnMap::default(),
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "row 3: t must be 0/1");
    }

    #[test]
    fn rejects_out_of_range_score_and_empty_body() {
        let err = load_dataset("x,t,y\n1.5,1,0\n".as_bytes(), &ColumnMap::default()).unwrap_err();
        assert_eq!(err.to_string(), "row 1: x must be in [0,1]");
        let err = load_dataset("x,t,y\n".as_bytes(), &ColumnMap::default()).unwrap_err();
        assert_eq!(err.to_string(), "no observations");
    }

    #[test]
    fn remapped_columns() {
        let cols = ColumnMap {
            x: "risk".into(),
            t: "statin".into(),
            y: "event".into(),
        };
        let data = load_dataset("event,risk,statin\n1,0.25,0\n".as_bytes(), &cols).unwrap();
        assert_eq!(data, vec![obs(0.25, 0, 1)]);
        assert!(matches!(
            load_dataset("x,t\n0.2,1\n".as_bytes(), &ColumnMap::default()),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn threshold_tie_goes_above() {
        let data = vec![obs(0.2, 0, 0), obs(0.19, 0, 0)];
        let s = window(&data, &Window::new(0.2, 0.05).unwrap()).unwrap();
        assert!(s.records[0].z);
        assert!(!s.records[1].z);
    }

    #[test]
    fn window_excludes_outside_bandwidth() {
        let data = vec![
            obs(0.174, 0, 0),
            obs(0.176, 0, 0),
            obs(0.21, 1, 0),
            obs(0.23, 1, 1),
        ];
        let s = window(&data, &Window::new(0.2, 0.025).unwrap()).unwrap();
        // |0.174 - 0.2| = 0.026 and |0.23 - 0.2| = 0.03 fall outside; 0.176 is inside
        assert_eq!(s.len(), 2);
        assert_eq!((s.n1, s.n0), (1, 1));
        assert!(s.records.iter().all(|r| r.x_star.abs() <= 0.025));
    }

    #[test]
    fn empty_arm_is_an_error() {
        let data = vec![obs(0.21, 1, 0), obs(0.25, 1, 1)];
        let err = window(&data, &Window::new(0.2, 0.1).unwrap()).unwrap_err();
        assert_eq!(err.to_string(), "empty arm");
    }

    #[test]
    fn window_must_fit_unit_interval() {
        assert!(Window::new(0.2, 0.0).is_err());
        assert!(Window::new(0.05, 0.1).is_err());
        assert!(Window::new(0.95, 0.1).is_err());
        assert!(Window::new(0.2, 0.2).is_ok());
    }

    #[test]
    fn plug_in_examples() {
        assert!((plug_in_from_means(0.3, 0.2, 0.05, 0.15).unwrap() - 2.0).abs() < 1e-12);
        assert!((plug_in_from_means(0.4, 0.1, 0.2, 0.1).unwrap() + 2.0).abs() < 1e-12);
        assert_eq!(plug_in_from_means(0.25, 0.25, 0.3, 0.1).unwrap(), 1.0);
        assert!(matches!(
            plug_in_from_means(0.3, 0.2, 0.1, 0.1),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn cell_count_means_match_direct_averages() {
        let data: Vec<_> = (0..200)
            .map(|i| {
                let x = 0.1 + 0.2 * (i as f64) / 199.0;
                obs(x, (i % 3 == 0) as u8, (i % 7 < 3) as u8)
            })
            .collect();
        let s = window(&data, &Window::new(0.2, 0.1).unwrap()).unwrap();
        let c = s.cell_counts();
        for z in [false, true] {
            let arm: Vec<_> = s.arm(z).collect();
            let n = arm.len() as f64;
            let avg = |f: &dyn Fn(&WindowedRecord) -> bool| {
                arm.iter().filter(|r| f(r)).count() as f64 / n
            };
            assert!((c.mean_y(z) - avg(&|r| r.y)).abs() < 1e-15);
            assert!((c.mean_t(z) - avg(&|r| r.t)).abs() < 1e-15);
            assert!((c.mean_y_tbar(z) - avg(&|r| r.y_tbar())).abs() < 1e-15);
            assert!((c.mean_y_t(z) - avg(&|r| r.y && r.t)).abs() < 1e-15);
            assert_eq!(c.n(z), arm.len() as u64);
        }
    }
}
