//! Python module `rdrrt`: datasets, windowing, the Bayesian and frequentist
//! estimators, diagnostics and the simulation study. Structured results are
//! returned as plain dicts.

use std::fs::File;
use std::io::BufReader;

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use rdrrt::data::{load_dataset, window, ColumnMap, Observation, Window};
use rdrrt::freq::{balke_pearl_bounds, first_stage_f, gmm_msmm, DEFAULT_BOOTSTRAP};
use rdrrt::mcmc::SamplerConfig;
use rdrrt::models::{fit, ModelSpec, ModelTag};
use rdrrt::sim::{generate_n, run_grid, EstimatorSpec, Scenario, ScenarioSpec};

fn err(e: rdrrt::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyArithmeticError::new_err(e.to_string())
    }
}

/// Serializes through JSON so nested results arrive as dicts and lists.
fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Records with risk score `x`, treatment `t` and outcome `y`.
#[pyclass(module = "rdrrt", frozen)]
#[derive(Clone)]
struct Dataset {
    obs: Vec<Observation>,
}

#[pymethods]
impl Dataset {
    #[new]
    fn new(x: Vec<f64>, t: Vec<bool>, y: Vec<bool>) -> PyResult<Self> {
        if x.len() != t.len() || x.len() != y.len() {
            return Err(PyValueError::new_err("x, t and y must have equal length"));
        }
        let obs = x
            .into_iter()
            .zip(t)
            .zip(y)
            .map(|((x, t), y)| Observation::new(x, t, y))
            .collect::<rdrrt::Result<_>>()
            .map_err(err)?;
        Ok(Self { obs })
    }

    /// Reads a comma-separated file with a header row.
    #[staticmethod]
    #[pyo3(signature = (path, x="x", t="t", y="y"))]
    fn from_csv(path: &str, x: &str, t: &str, y: &str) -> PyResult<Self> {
        let f = File::open(path).map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        let cols = ColumnMap {
            x: x.into(),
            t: t.into(),
            y: y.into(),
        };
        Ok(Self {
            obs: load_dataset(BufReader::new(f), &cols).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.obs.len()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.obs.iter().map(|o| o.x).collect()
    }

    #[getter]
    fn t(&self) -> Vec<bool> {
        self.obs.iter().map(|o| o.t).collect()
    }

    #[getter]
    fn y(&self) -> Vec<bool> {
        self.obs.iter().map(|o| o.y).collect()
    }

    #[pyo3(signature = (bandwidth, threshold=0.2))]
    fn window(&self, bandwidth: f64, threshold: f64) -> PyResult<Sample> {
        let w = Window::new(threshold, bandwidth).map_err(err)?;
        Ok(Sample {
            inner: window(&self.obs, &w).map_err(err)?,
        })
    }
}

/// Records inside one bandwidth around the threshold.
#[pyclass(module = "rdrrt", frozen)]
struct Sample {
    inner: rdrrt::WindowedSample,
}

#[pymethods]
impl Sample {
    #[getter]
    fn n1(&self) -> usize {
        self.inner.n1
    }

    #[getter]
    fn n0(&self) -> usize {
        self.inner.n0
    }

    #[getter]
    fn bandwidth(&self) -> f64 {
        self.inner.window.bandwidth
    }

    /// Counts indexed `[z][y][t]`.
    fn cell_counts(&self) -> [[[u64; 2]; 2]; 2] {
        self.inner.cell_counts().counts
    }

    fn plug_in_rrt(&self) -> PyResult<f64> {
        rdrrt::plug_in_rrt(&self.inner.cell_counts()).map_err(err)
    }

    #[pyo3(signature = (bootstrap=DEFAULT_BOOTSTRAP, seed=1))]
    fn gmm(&self, py: Python<'_>, bootstrap: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let g = py
            .detach(|| gmm_msmm(&self.inner, bootstrap, seed))
            .map_err(err)?;
        to_py(py, &g)
    }

    fn bounds(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &balke_pearl_bounds(&self.inner))
    }

    fn first_stage_f(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let f = first_stage_f(&self.inner).map_err(err)?;
        // the JSON route turns an infinite F into a string sentinel
        let d = to_py(py, &f)?;
        d.bind(py).set_item("f", f.f)?;
        Ok(d)
    }

    /// Posterior summary of the RRT under one model.
    #[pyo3(signature = (model, constrained=false, chains=2, burn_in=10_000, iterations=50_000,
                        retain=1_000, thin=50, seed=1))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &self,
        py: Python<'_>,
        model: &str,
        constrained: bool,
        chains: usize,
        burn_in: usize,
        iterations: usize,
        retain: usize,
        thin: usize,
        seed: u64,
    ) -> PyResult<Py<PyAny>> {
        let tag: ModelTag = model.parse().map_err(err)?;
        let cfg = SamplerConfig {
            chains,
            burn_in,
            iterations,
            retain,
            thin,
            seed,
            ..Default::default()
        };
        let (_, est) = py
            .detach(|| fit(&self.inner, &ModelSpec::new(tag, constrained), &cfg))
            .map_err(err)?;
        to_py(py, &est)
    }
}

fn scenario_spec(scenario: &str, n: usize, seed: u64) -> PyResult<ScenarioSpec> {
    let sc: Scenario = scenario.parse().map_err(err)?;
    Ok(ScenarioSpec {
        n,
        seed,
        ..ScenarioSpec::new(sc)
    })
}

/// One simulated dataset, e.g. `simulate("strong/low/high")`.
#[pyfunction]
#[pyo3(signature = (scenario, n=10_000, replicate=0, seed=0))]
fn simulate(scenario: &str, n: usize, replicate: usize, seed: u64) -> PyResult<Dataset> {
    let spec = scenario_spec(scenario, n, seed)?;
    Ok(Dataset {
        obs: generate_n(&spec, replicate, n).map_err(err)?.observations,
    })
}

/// Repeated-sampling study for one scenario; returns the full report.
#[pyfunction]
#[pyo3(signature = (scenario, estimators, bandwidths, replications=100, n=10_000, seed=0,
                    bootstrap=DEFAULT_BOOTSTRAP, iterations=50_000, burn_in=10_000, thin=50))]
#[allow(clippy::too_many_arguments)]
fn run_study(
    py: Python<'_>,
    scenario: &str,
    estimators: Vec<String>,
    bandwidths: Vec<f64>,
    replications: usize,
    n: usize,
    seed: u64,
    bootstrap: usize,
    iterations: usize,
    burn_in: usize,
    thin: usize,
) -> PyResult<Py<PyAny>> {
    let spec = ScenarioSpec {
        bandwidths,
        replications,
        ..scenario_spec(scenario, n, seed)?
    };
    let est = estimators
        .iter()
        .map(|e| EstimatorSpec::parse(e, false, bootstrap))
        .collect::<rdrrt::Result<Vec<_>>>()
        .map_err(err)?;
    let cfg = SamplerConfig {
        iterations,
        burn_in,
        thin,
        ..Default::default()
    };
    let report = py.detach(|| run_grid(&spec, &est, &cfg)).map_err(err)?;
    to_py(py, &report)
}

#[pymodule(name = "rdrrt")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Sample>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add("MODELS", ["pois.pois", "pois.flex", "pois.prod.flex"])?;
    Ok(())
}
