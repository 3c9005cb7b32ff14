//! Run configuration, command execution and output documents for the
//! `rdrrt` binary. Every document has the shape
//! `{config, results, diagnostics}` and embeds the fully resolved config.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rdrrt::data::{load_dataset, window, CellCounts, ColumnMap, Observation, Window};
use rdrrt::explore::{explore, BinnedSummary, ExploreOptions};
use rdrrt::freq::{balke_pearl_bounds, first_stage_f, gmm_msmm, BoundsResult, FTestResult};
use rdrrt::mcmc::SamplerConfig;
use rdrrt::models::fit;
use rdrrt::sim::{mix_seed, run_scenarios, EstimatorSpec, ScenarioSpec, SimReport};
use rdrrt::Error;

pub const EMPTY_ARM: &str = "unavailable: empty arm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Explore,
    Estimate,
    Simulate,
    Diagnose,
}

/// Everything that determines a run's output. Serialized into every
/// document; the output destination is deliberately not part of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub columns: ColumnMap,
    pub threshold: f64,
    pub bandwidths: Vec<f64>,
    pub estimators: Vec<EstimatorSpec>,
    pub sampler: SamplerConfig,
    pub bootstrap: usize,
    pub seed: u64,
    pub format: Format,
    pub explore: Option<ExploreOptions>,
    pub scenarios: Vec<ScenarioSpec>,
}

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum RunError {
    /// Bad flags, configuration or input data: exit code 1.
    Input(String),
    /// Numerical failure: exit code 2.
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Input(_) => 1,
            RunError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Input(m) | RunError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            RunError::Input(e.to_string())
        } else {
            RunError::Numerical(e.to_string())
        }
    }
}

/// One Table-1 cell: an estimator at a bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub bandwidth: f64,
    pub estimator: String,
    /// `ok`, `unavailable: empty arm`, or `failed: <reason>`.
    pub status: String,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub l95: Option<f64>,
    pub u95: Option<f64>,
    pub n1: usize,
    pub n0: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub bandwidth: f64,
    pub estimator: String,
    pub max_rhat: Option<f64>,
    pub min_ess: Option<f64>,
    pub share_nonpositive: Option<f64>,
    pub bootstrap_failed: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDiagnostics {
    pub fits: Vec<FitDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseBlock {
    pub bandwidth: f64,
    pub status: String,
    pub n1: usize,
    pub n0: usize,
    pub cell_counts: Option<CellCounts>,
    pub first_stage: Option<FTestResult>,
    pub bounds: Option<BoundsResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseDiagnostics {
    pub bandwidths: Vec<DiagnoseBlock>,
}

/// Simulation cell summary in the common result-row layout: `mean` is the
/// mean of the point estimates, `median` their median, and `l95`/`u95` the
/// averaged interval endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResultRow {
    pub scenario: String,
    pub bandwidth: f64,
    pub estimator: String,
    pub true_rr: f64,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub l95: Option<f64>,
    pub u95: Option<f64>,
    pub coverage: Option<f64>,
    pub bias: Option<f64>,
    pub median_width: Option<f64>,
    pub failed: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<R, D> {
    pub config: RunConfig,
    pub results: Vec<R>,
    pub diagnostics: D,
}

pub type EstimateDocument = Document<ResultRow, EstimateDiagnostics>;
pub type DiagnoseDocument = Document<(), DiagnoseDiagnostics>;
pub type SimulateDocument = Document<SimResultRow, SimReport>;
pub type ExploreDocument = Document<(), BinnedSummary>;

pub fn read_input(cfg: &RunConfig) -> Result<Vec<Observation>, RunError> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| RunError::Input("--input is required".into()))?;
    let file = File::open(path)
        .map_err(|e| RunError::Input(format!("cannot open {}: {e}", path.display())))?;
    Ok(load_dataset(BufReader::new(file), &cfg.columns)?)
}

fn windows(cfg: &RunConfig) -> Result<Vec<Window>, RunError> {
    if cfg.bandwidths.is_empty() {
        return Err(RunError::Input("at least one bandwidth is required".into()));
    }
    Ok(cfg
        .bandwidths
        .iter()
        .map(|&h| Window::new(cfg.threshold, h))
        .collect::<rdrrt::Result<_>>()?)
}

fn arm_sizes(data: &[Observation], w: &Window) -> (usize, usize) {
    let inside = data
        .iter()
        .filter(|o| (o.x - w.threshold).abs() <= w.bandwidth);
    inside.fold((0, 0), |(n1, n0), o| {
        if o.x >= w.threshold {
            (n1 + 1, n0)
        } else {
            (n1, n0 + 1)
        }
    })
}

fn run_cell(
    data: &[Observation],
    w: &Window,
    est: &EstimatorSpec,
    sampler: &SamplerConfig,
    seed: u64,
) -> (ResultRow, FitDiagnostics) {
    let (n1, n0) = arm_sizes(data, w);
    let label = est.label();
    let mut row = ResultRow {
        bandwidth: w.bandwidth,
        estimator: label.clone(),
        status: "ok".into(),
        mean: None,
        median: None,
        l95: None,
        u95: None,
        n1,
        n0,
        warnings: Vec::new(),
    };
    let mut diag = FitDiagnostics {
        bandwidth: w.bandwidth,
        estimator: label,
        max_rhat: None,
        min_ess: None,
        share_nonpositive: None,
        bootstrap_failed: None,
    };
    let s = match window(data, w) {
        Ok(s) => s,
        Err(Error::EmptyArm) => {
            row.status = EMPTY_ARM.into();
            return (row, diag);
        }
        Err(e) => {
            row.status = format!("failed: {e}");
            return (row, diag);
        }
    };
    match est {
        EstimatorSpec::Bayes(model) => {
            let cfg = SamplerConfig {
                seed,
                ..sampler.clone()
            };
            match fit(&s, model, &cfg) {
                Ok((_, e)) => {
                    row.mean = Some(e.mean);
                    row.median = Some(e.median);
                    row.l95 = Some(e.l95);
                    row.u95 = Some(e.u95);
                    row.warnings = e.warnings;
                    diag.max_rhat = e.max_rhat;
                    diag.min_ess = e.min_ess;
                    diag.share_nonpositive = Some(e.share_nonpositive);
                }
                Err(e) => row.status = format!("failed: {e}"),
            }
        }
        EstimatorSpec::Gmm { bootstrap } => match gmm_msmm(&s, *bootstrap, seed) {
            Ok(g) => {
                // no posterior: mean and median both carry the point estimate
                row.mean = Some(g.rrt);
                row.median = Some(g.rrt);
                row.l95 = g.l95;
                row.u95 = g.u95;
                if g.bootstrap_failed > 0 {
                    row.warnings.push(format!(
                        "{} of {} bootstrap replicates had no root",
                        g.bootstrap_failed, g.bootstrap
                    ));
                }
                diag.bootstrap_failed = Some(g.bootstrap_failed);
            }
            Err(e) => row.status = format!("failed: {e}"),
        },
    }
    (row, diag)
}

/// Runs every (bandwidth, estimator) cell. Cells whose window has an empty
/// arm are reported as unavailable; other per-cell failures are recorded in
/// the cell and make the run exit with the numerical-failure code.
pub fn estimate_command(cfg: &RunConfig) -> Result<EstimateDocument, RunError> {
    if cfg.estimators.is_empty() {
        return Err(RunError::Input("at least one estimator is required".into()));
    }
    cfg.sampler.validate()?;
    let ws = windows(cfg)?;
    let data = read_input(cfg)?;
    let cells: Vec<(usize, usize)> = (0..ws.len())
        .flat_map(|b| (0..cfg.estimators.len()).map(move |e| (b, e)))
        .collect();
    let out: Vec<(ResultRow, FitDiagnostics)> = cells
        .par_iter()
        .map(|&(b, e)| {
            let seed = mix_seed(&[cfg.seed, b as u64, e as u64]);
            run_cell(&data, &ws[b], &cfg.estimators[e], &cfg.sampler, seed)
        })
        .collect();
    let (results, fits) = out.into_iter().unzip();
    Ok(Document {
        config: cfg.clone(),
        results,
        diagnostics: EstimateDiagnostics { fits },
    })
}

pub fn diagnose_command(cfg: &RunConfig) -> Result<DiagnoseDocument, RunError> {
    let ws = windows(cfg)?;
    let data = read_input(cfg)?;
    let mut blocks = Vec::with_capacity(ws.len());
    for w in &ws {
        let (n1, n0) = arm_sizes(&data, w);
        let mut block = DiagnoseBlock {
            bandwidth: w.bandwidth,
            status: "ok".into(),
            n1,
            n0,
            cell_counts: None,
            first_stage: None,
            bounds: None,
        };
        match window(&data, w) {
            Ok(s) => {
                block.cell_counts = Some(s.cell_counts());
                block.bounds = Some(balke_pearl_bounds(&s));
                match first_stage_f(&s) {
                    Ok(f) => block.first_stage = Some(f),
                    Err(e) => block.status = format!("failed: {e}"),
                }
            }
            Err(Error::EmptyArm) => block.status = EMPTY_ARM.into(),
            Err(e) => return Err(e.into()),
        }
        blocks.push(block);
    }
    Ok(Document {
        config: cfg.clone(),
        results: Vec::new(),
        diagnostics: DiagnoseDiagnostics { bandwidths: blocks },
    })
}

pub fn explore_command(cfg: &RunConfig) -> Result<ExploreDocument, RunError> {
    let opts = cfg
        .explore
        .clone()
        .ok_or_else(|| RunError::Input("explore options missing".into()))?;
    let data = read_input(cfg)?;
    Ok(Document {
        config: cfg.clone(),
        results: Vec::new(),
        diagnostics: explore(&data, &opts)?,
    })
}

pub fn simulate_command(cfg: &RunConfig) -> Result<SimulateDocument, RunError> {
    if cfg.scenarios.is_empty() {
        return Err(RunError::Input("no scenarios given".into()));
    }
    if cfg.estimators.is_empty() {
        return Err(RunError::Input("at least one estimator is required".into()));
    }
    let report = run_scenarios(&cfg.scenarios, &cfg.estimators, &cfg.sampler)?;
    let results = report
        .cells
        .iter()
        .map(|c| {
            let m = c.metrics.as_ref();
            let mut warnings = Vec::new();
            if c.failed > 0 {
                warnings.push(format!(
                    "{} of {} replicates failed",
                    c.failed, c.replications
                ));
            }
            let slow = c
                .intervals()
                .filter(|i| i.max_rhat.is_some_and(|r| r > rdrrt::mcmc::RHAT_WARNING))
                .count();
            if slow > 0 {
                warnings.push(format!("{slow} replicates with max R-hat above threshold"));
            }
            SimResultRow {
                scenario: c.scenario.clone(),
                bandwidth: c.bandwidth,
                estimator: c.estimator.clone(),
                true_rr: c.true_rr,
                mean: m.map(|m| m.mean_estimate),
                median: m.map(|m| m.median_estimate),
                l95: m.map(|m| m.mean_l95),
                u95: m.map(|m| m.mean_u95),
                coverage: m.map(|m| m.coverage),
                bias: m.map(|m| m.bias),
                median_width: m.map(|m| m.median_width),
                failed: c.failed,
                warnings,
            }
        })
        .collect();
    Ok(Document {
        config: cfg.clone(),
        results,
        diagnostics: report,
    })
}

/// True when any estimate or diagnostic cell failed numerically.
pub fn has_failed_cells(doc: &EstimateDocument) -> bool {
    doc.results.iter().any(|r| r.status.starts_with("failed"))
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<String, RunError> {
    let mut s = serde_json::to_string_pretty(doc)
        .map_err(|e| RunError::Numerical(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn config_comment(cfg: &RunConfig) -> Result<String, RunError> {
    let json = serde_json::to_string(cfg)
        .map_err(|e| RunError::Numerical(format!("serialization failed: {e}")))?;
    Ok(format!("# config: {json}\n"))
}

/// Shortest round-trip representation, with exponent for extreme values.
fn num(v: f64) -> String {
    if v.is_finite() {
        serde_json::Number::from_f64(v)
            .map(|n| n.to_string())
            .unwrap_or_default()
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_err(e: impl std::fmt::Display) -> RunError {
    RunError::Numerical(format!("csv output failed: {e}"))
}

/// CSV rendering: a `# config: {...}` comment line followed by one table.
pub trait CsvRender {
    fn to_csv(&self) -> Result<String, RunError>;
}

fn finish(cfg: &RunConfig, body: Vec<u8>) -> Result<String, RunError> {
    let mut s = config_comment(cfg)?;
    s.push_str(&String::from_utf8(body).map_err(csv_err)?);
    Ok(s)
}

impl CsvRender for EstimateDocument {
    fn to_csv(&self) -> Result<String, RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "bandwidth",
            "estimator",
            "status",
            "mean",
            "median",
            "l95",
            "u95",
            "n1",
            "n0",
            "warnings",
        ])
        .map_err(csv_err)?;
        for r in &self.results {
            w.write_record([
                num(r.bandwidth),
                r.estimator.clone(),
                r.status.clone(),
                opt(r.mean),
                opt(r.median),
                opt(r.l95),
                opt(r.u95),
                r.n1.to_string(),
                r.n0.to_string(),
                r.warnings.join("; "),
            ])
            .map_err(csv_err)?;
        }
        finish(&self.config, w.into_inner().map_err(csv_err)?)
    }
}

impl CsvRender for DiagnoseDocument {
    fn to_csv(&self) -> Result<String, RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "bandwidth",
            "status",
            "n1",
            "n0",
            "f",
            "df1",
            "df2",
            "p_value",
            "lower",
            "upper",
            "width",
            "instrument_inequality_holds",
        ])
        .map_err(csv_err)?;
        for b in &self.diagnostics.bandwidths {
            let f = b.first_stage.as_ref();
            let bd = b.bounds.as_ref();
            w.write_record([
                num(b.bandwidth),
                b.status.clone(),
                b.n1.to_string(),
                b.n0.to_string(),
                opt(f.map(|f| f.f)),
                f.map(|f| f.df1.to_string()).unwrap_or_default(),
                f.map(|f| f.df2.to_string()).unwrap_or_default(),
                opt(f.map(|f| f.p_value)),
                opt(bd.map(|b| b.lower)),
                opt(bd.map(|b| b.upper)),
                opt(bd.map(|b| b.width)),
                bd.map(|b| b.instrument_inequality_holds.to_string())
                    .unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        finish(&self.config, w.into_inner().map_err(csv_err)?)
    }
}

impl CsvRender for SimulateDocument {
    fn to_csv(&self) -> Result<String, RunError> {
        let mut body = Vec::new();
        self.diagnostics.write_csv(&mut body)?;
        finish(&self.config, body)
    }
}

impl CsvRender for ExploreDocument {
    fn to_csv(&self) -> Result<String, RunError> {
        let mut body = Vec::new();
        self.diagnostics.write_csv(&mut body)?;
        finish(&self.config, body)
    }
}

pub fn render<T: Serialize + CsvRender>(doc: &T, format: Format) -> Result<String, RunError> {
    match format {
        Format::Json => to_json(doc),
        Format::Csv => doc.to_csv(),
    }
}

/// Writes to `out`, or to stdout when absent.
pub fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), RunError> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| RunError::Input(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| RunError::Input(format!("cannot write output: {e}"))),
    }
}
