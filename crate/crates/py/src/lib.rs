//! Python bindings: presets, likelihoods, estimation, simulation, filtering
//! and the experiments. Reports come back as plain dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyModule};
use serde::Serialize;

use qnd_core::config::{self, Experiment, ModelSpec, RunConfig};
use qnd_core::estimate::mle_component;
use qnd_core::lab::{
    consistency_experiment, cramer_rao_experiment, fig1_experiment, lamn_experiment, mixture_collapse_experiment,
    purification_experiment,
};
use qnd_core::presets::{self, Preset, PresetName};
use qnd_core::quantum::{Filter, FilterState};
use qnd_core::report::to_json_string;
use qnd_core::{
    check_identifiability, fisher_information, kl_divergence, limit_loglik, loglik, mle, sample_mixture_trajectory,
    sample_trajectory, CountVector, Error, MixtureWeights, MleOptions, ParameterBox,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Construction(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let s = to_json_string(value).map_err(py_err)?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

fn parse_box(b: Option<(Vec<f64>, Vec<f64>)>) -> PyResult<Option<ParameterBox>> {
    b.map(|(lo, hi)| ParameterBox::new(lo, hi)).transpose().map_err(py_err)
}

/// A named preset: the family, its QND system when it has one, and the
/// default truth, weights and search box.
#[pyclass(module = "qndmix", frozen)]
struct Model {
    inner: Preset,
}

impl Model {
    fn weights(&self, q: Option<Vec<f64>>) -> PyResult<MixtureWeights> {
        match q {
            Some(w) => MixtureWeights::new(w).map_err(py_err),
            None => Ok(self.inner.q.clone()),
        }
    }

    fn count_vector(&self, counts: Vec<u64>) -> CountVector {
        CountVector::from_counts(counts)
    }
}

#[pymethods]
impl Model {
    /// `toy_haroche`, `toy_haroche_visibility` or `qubit_rotation`.
    #[new]
    #[pyo3(signature = (preset = "toy_haroche", components = None))]
    fn new(preset: &str, components: Option<usize>) -> PyResult<Self> {
        let name = PresetName::parse(preset).map_err(py_err)?;
        let inner = match (name, components) {
            (PresetName::QubitRotation, Some(d)) => presets::qubit_rotation_with(d),
            (_, None) => presets::preset(name),
            (_, Some(_)) => return Err(PyValueError::new_err("components only applies to qubit_rotation")),
        }
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name.as_str()
    }

    #[getter]
    fn alphabet(&self) -> Vec<String> {
        self.inner.family.alphabet().labels().to_vec()
    }

    #[getter]
    fn components(&self) -> Vec<String> {
        self.inner.family.components().labels().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.family.dim()
    }

    #[getter]
    fn domain(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.inner.family.domain();
        (d.lower().to_vec(), d.upper().to_vec())
    }

    #[getter]
    fn search_box(&self) -> (Vec<f64>, Vec<f64>) {
        let b = &self.inner.search_box;
        (b.lower().to_vec(), b.upper().to_vec())
    }

    #[getter]
    fn theta_star(&self) -> Vec<f64> {
        self.inner.theta_star.clone()
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.inner.q.as_slice().to_vec()
    }

    #[getter]
    fn is_quantum(&self) -> bool {
        self.inner.system.is_some()
    }

    fn probs(&self, theta: Vec<f64>, alpha: usize) -> PyResult<Vec<f64>> {
        self.inner.family.probs(&theta, alpha).map_err(py_err)
    }

    /// Row-major `D × D` Fisher information of one component.
    fn fisher(&self, theta: Vec<f64>, alpha: usize) -> PyResult<Vec<f64>> {
        let info = fisher_information(&self.inner.family, &theta, alpha).map_err(py_err)?;
        let dim = self.inner.family.dim();
        Ok((0..dim * dim).map(|i| info.get(i / dim, i % dim)).collect())
    }

    fn kl(&self, theta: Vec<f64>, theta2: Vec<f64>, alpha: usize, beta: usize) -> PyResult<f64> {
        kl_divergence(&self.inner.family, &theta, &theta2, alpha, beta).map_err(py_err)
    }

    fn limit_loglik(&self, theta_star: Vec<f64>, gamma: usize, theta: Vec<f64>) -> PyResult<f64> {
        limit_loglik(&self.inner.family, &theta_star, gamma, &theta).map_err(py_err)
    }

    #[pyo3(signature = (grid, tol = 1e-4))]
    fn identifiability(&self, py: Python<'_>, grid: Vec<Vec<f64>>, tol: f64) -> PyResult<PyObject> {
        let rep = check_identifiability(&self.inner.family, &grid, tol).map_err(py_err)?;
        to_py(py, &rep)
    }

    /// Outcomes of an `n`-step record of component `gamma`.
    fn sample(&self, theta: Vec<f64>, gamma: usize, n: usize, seed: u64) -> PyResult<Vec<usize>> {
        Ok(sample_trajectory(&self.inner.family, &theta, gamma, n, seed).map_err(py_err)?.outcomes)
    }

    /// `(gamma, outcomes)` with `gamma` drawn from the weights.
    #[pyo3(signature = (theta, n, seed, q = None))]
    fn sample_mixture(&self, theta: Vec<f64>, n: usize, seed: u64, q: Option<Vec<f64>>) -> PyResult<(usize, Vec<usize>)> {
        let q = self.weights(q)?;
        let t = sample_mixture_trajectory(&self.inner.family, &theta, &q, n, seed).map_err(py_err)?;
        Ok((t.gamma, t.outcomes))
    }

    fn counts(&self, outcomes: Vec<usize>) -> PyResult<Vec<u64>> {
        let c = CountVector::from_outcomes(self.inner.family.alphabet_size(), &outcomes).map_err(py_err)?;
        Ok(c.counts)
    }

    /// Normalized mixture log-likelihood `(1/n) ln ℙ_θ`.
    #[pyo3(signature = (counts, theta, q = None))]
    fn loglik(&self, counts: Vec<u64>, theta: Vec<f64>, q: Option<Vec<f64>>) -> PyResult<f64> {
        let q = self.weights(q)?;
        Ok(loglik(&self.inner.family, &q, &self.count_vector(counts), &theta).map_err(py_err)?.value)
    }

    /// Mixture maximum-likelihood estimate as a report dict. Searches the
    /// preset's identifiable box unless `search_box = (lower, upper)` is given.
    #[pyo3(signature = (counts, q = None, search_box = None, with_fisher = true))]
    fn mle(
        &self,
        py: Python<'_>,
        counts: Vec<u64>,
        q: Option<Vec<f64>>,
        search_box: Option<(Vec<f64>, Vec<f64>)>,
        with_fisher: bool,
    ) -> PyResult<PyObject> {
        let q = self.weights(q)?;
        let bx = parse_box(search_box)?.unwrap_or_else(|| self.inner.search_box.clone());
        let opts = MleOptions { search_box: Some(bx), with_fisher, ..MleOptions::default() };
        let rep = mle(&self.inner.family, &q, &self.count_vector(counts), &opts).map_err(py_err)?;
        to_py(py, &rep)
    }

    #[pyo3(signature = (counts, gamma, search_box = None))]
    fn mle_component(
        &self,
        counts: Vec<u64>,
        gamma: usize,
        search_box: Option<(Vec<f64>, Vec<f64>)>,
    ) -> PyResult<Vec<f64>> {
        let bx = parse_box(search_box)?.unwrap_or_else(|| self.inner.search_box.clone());
        let opts = MleOptions { search_box: Some(bx), ..MleOptions::default() };
        mle_component(&self.inner.family, &self.count_vector(counts), gamma, &opts).map_err(py_err)
    }

    /// Posterior path `[q_0, …, q_n]` along `outcomes` at `theta`. With a
    /// QND system and `track_state`, each entry also carries the
    /// conditional state as `(re, im)` pairs.
    #[pyo3(signature = (theta, outcomes, q = None, track_state = false))]
    fn filter(
        &self,
        py: Python<'_>,
        theta: Vec<f64>,
        outcomes: Vec<usize>,
        q: Option<Vec<f64>>,
        track_state: bool,
    ) -> PyResult<Vec<PyObject>> {
        let q0 = match q {
            Some(w) => w,
            None => self.inner.q.as_slice().to_vec(),
        };
        let filter = match (&self.inner.system, track_state) {
            (Some(s), true) => Filter::from_system(s, &theta),
            (None, true) => return Err(PyValueError::new_err("this preset has no QND system to track")),
            _ => Filter::from_family(&self.inner.family, &theta),
        }
        .map_err(py_err)?;
        let path = filter.run(filter.initial(&q0).map_err(py_err)?, &outcomes).map_err(py_err)?;
        path.iter().map(|s| state_dict(py, s)).collect()
    }
}

fn state_dict(py: Python<'_>, s: &FilterState) -> PyResult<PyObject> {
    let d = PyDict::new(py);
    d.set_item("step", s.step)?;
    d.set_item("q", s.q.clone())?;
    if let Some(phi) = &s.phi {
        d.set_item("phi", phi.iter().map(|z| (z.re, z.im)).collect::<Vec<_>>())?;
    }
    d.set_item("map_component", s.map_component())?;
    Ok(d.into_any().unbind())
}

fn build_config(
    experiment: &str,
    preset: &str,
    seed: u64,
    n_grid: Option<Vec<usize>>,
    reps: Option<usize>,
    h: Option<Vec<f64>>,
    workers: Option<usize>,
) -> PyResult<RunConfig> {
    let exp: Experiment = experiment.parse().map_err(py_err)?;
    let mut cfg = RunConfig::new(exp);
    cfg.model = ModelSpec { preset: Some(preset.to_string()), ..ModelSpec::default() };
    cfg.seed = seed;
    cfg.n_grid = n_grid;
    cfg.n_reps = reps;
    cfg.h = h;
    cfg.workers = workers;
    Ok(cfg)
}

/// Runs one experiment in memory and returns its report. `estimate` is
/// served by `Model.mle`; use `run_config` for the artifact-writing path.
#[pyfunction]
#[pyo3(signature = (experiment, preset = "toy_haroche", seed = 0, n_grid = None, reps = None, h = None, workers = None, stride = None))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    experiment: &str,
    preset: &str,
    seed: u64,
    n_grid: Option<Vec<usize>>,
    reps: Option<usize>,
    h: Option<Vec<f64>>,
    workers: Option<usize>,
    stride: Option<usize>,
) -> PyResult<PyObject> {
    let mut cfg = build_config(experiment, preset, seed, n_grid, reps, h, workers)?;
    cfg.stride = stride;
    let r = cfg.resolve().map_err(py_err)?;
    let (fam, plan) = (&r.family, &r.plan);
    py.allow_threads(|| -> Result<String, Error> {
        match cfg.experiment {
            Experiment::Lamn => to_json_string(&lamn_experiment(fam, plan)?),
            Experiment::Collapse => to_json_string(&mixture_collapse_experiment(fam, plan)?),
            Experiment::Consistency => to_json_string(&consistency_experiment(fam, plan)?),
            Experiment::CramerRao => to_json_string(&cramer_rao_experiment(fam, plan)?),
            Experiment::Purify => to_json_string(&purification_experiment(fam, r.system.as_ref(), plan)?),
            Experiment::Fig1 => to_json_string(&fig1_experiment(fam, plan, r.stride)?),
            Experiment::Estimate => Err(Error::Config("estimate: use Model.mle or run_config".into())),
        }
    })
    .map_err(py_err)
    .and_then(|s| Ok(py.import("json")?.call_method1("loads", (s,))?.unbind()))
}

/// Runs a TOML config, writing artifacts under its output directory (or
/// `out_dir`). Returns `{experiment, passed, artifacts, exit_code}`.
#[pyfunction]
#[pyo3(signature = (toml, out_dir = None))]
fn run_config(py: Python<'_>, toml: &str, out_dir: Option<PathBuf>) -> PyResult<PyObject> {
    let mut cfg = RunConfig::from_toml_str(toml).map_err(py_err)?;
    if out_dir.is_some() {
        cfg.output_dir = out_dir;
    }
    let outcome = py.allow_threads(|| config::run(&cfg)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("experiment", outcome.experiment.as_str())?;
    d.set_item("passed", outcome.passed)?;
    d.set_item("exit_code", if outcome.passed { 0 } else { 1 })?;
    d.set_item(
        "artifacts",
        outcome.artifacts.iter().map(|a| a.display().to_string()).collect::<Vec<_>>(),
    )?;
    Ok(d.into_any().unbind())
}

fn presets_list() -> Vec<&'static str> {
    ["toy_haroche", "toy_haroche_visibility", "qubit_rotation"].to_vec()
}

#[pyfunction]
fn experiments() -> Vec<&'static str> {
    Experiment::ALL.iter().map(|e| e.as_str()).collect()
}

#[pymodule]
fn qndmix(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(experiments, m)?)?;
    m.add("presets", presets_list())?;
    Ok(())
}
