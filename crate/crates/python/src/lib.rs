//! Python bindings: models, Bellman operators, exact solvers, the learner
//! and Monte-Carlo evaluation. Value functions cross the boundary as plain
//! lists of floats indexed by joint state.

use klc_opi::learner::{self, InitRule, Mode, RunConfig, RunOptions, SamplingRule, Scheme, StepSchedule};
use klc_opi::metrics::{self, EvalSettings};
use klc_opi::staghare::{self, GridSpec};
use klc_opi::{JointPolicy, ValueFunction};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: klc_opi::Error) -> PyErr {
    if e.is_numeric() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn values(model: &klc_opi::Model, v: Vec<f64>) -> PyResult<ValueFunction> {
    if v.len() != model.n_states() {
        return Err(PyValueError::new_err(format!(
            "value list has {} entries, model has {} states",
            v.len(),
            model.n_states()
        )));
    }
    Ok(ValueFunction::new(v))
}

/// Factored multi-agent MDP with KL control costs.
#[pyclass(name = "Model", module = "klc_opi_py", frozen)]
struct PyModel {
    inner: klc_opi::Model,
    grid: Option<GridSpec>,
}

#[pymethods]
impl PyModel {
    /// Square Stag-Hare grid with the default layout.
    #[staticmethod]
    #[pyo3(signature = (grid_size = 5, gamma = 0.95))]
    fn stag_hare(grid_size: usize, gamma: f64) -> PyResult<Self> {
        let grid = GridSpec::square(grid_size);
        let inner = staghare::build_model(&grid, gamma).map_err(err)?;
        Ok(Self { inner, grid: Some(grid) })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = klc_opi::io::model_from_json(text).map_err(err)?;
        Ok(Self { inner, grid: None })
    }

    fn to_json(&self) -> PyResult<String> {
        klc_opi::io::model_to_json(&self.inner).map_err(err)
    }

    fn with_gamma(&self, gamma: f64) -> PyResult<Self> {
        let inner = self.inner.with_gamma(gamma).map_err(err)?;
        Ok(Self { inner, grid: self.grid.clone() })
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    #[getter]
    fn n_agents(&self) -> usize {
        self.inner.n_agents()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn cost(&self) -> Vec<f64> {
        self.inner.cost().to_vec()
    }

    #[getter]
    fn q_max(&self) -> f64 {
        self.inner.q_max()
    }

    fn encode(&self, substates: Vec<usize>) -> PyResult<usize> {
        self.inner.space().encode(&substates).map_err(err)
    }

    fn decode(&self, index: usize) -> PyResult<Vec<usize>> {
        self.inner.space().decode(index).map_err(err)
    }

    /// Uncontrolled joint row at `state` as (next_state, probability) pairs.
    fn joint_row(&self, state: usize) -> PyResult<Vec<(usize, f64)>> {
        let row = self.inner.joint_kernel_row(state).map_err(err)?;
        Ok(row.iter().collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(n_agents={}, n_states={}, gamma={})",
            self.inner.n_agents(),
            self.inner.n_states(),
            self.inner.gamma()
        )
    }
}

/// Stochastic joint policy, one transition row per joint state.
#[pyclass(name = "Policy", module = "klc_opi_py", frozen)]
struct PyPolicy {
    inner: JointPolicy,
}

#[pymethods]
impl PyPolicy {
    #[staticmethod]
    fn uncontrolled(model: &PyModel) -> Self {
        Self {
            inner: JointPolicy::uncontrolled(&model.inner),
        }
    }

    /// Shortest-path-to-stag policy; Stag-Hare models only.
    #[staticmethod]
    fn baseline(model: &PyModel) -> PyResult<Self> {
        let grid = model
            .grid
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("baseline needs a model built with Model.stag_hare"))?;
        let inner = staghare::deterministic_baseline(grid, &model.inner).map_err(err)?;
        Ok(Self { inner })
    }

    fn row(&self, state: usize) -> PyResult<Vec<(usize, f64)>> {
        if state >= self.inner.len() {
            return Err(PyValueError::new_err(format!("state {state} out of range")));
        }
        Ok(self.inner.row(state).iter().collect())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
fn apply_optimal_operator(model: &PyModel, v: Vec<f64>) -> PyResult<Vec<f64>> {
    let v = values(&model.inner, v)?;
    Ok(klc_opi::apply_optimal_operator(&model.inner, &v).map_err(err)?.into_inner())
}

#[pyfunction]
fn apply_evaluation_operator(model: &PyModel, policy: &PyPolicy, v: Vec<f64>) -> PyResult<Vec<f64>> {
    let v = values(&model.inner, v)?;
    let out = klc_opi::apply_evaluation_operator(&model.inner, &policy.inner, &v).map_err(err)?;
    Ok(out.into_inner())
}

#[pyfunction]
fn greedy_policy(model: &PyModel, v: Vec<f64>) -> PyResult<PyPolicy> {
    let v = values(&model.inner, v)?;
    let inner = klc_opi::greedy_policy(&model.inner, &v).map_err(err)?;
    Ok(PyPolicy { inner })
}

#[pyfunction]
fn bellman_residual(model: &PyModel, v: Vec<f64>) -> PyResult<f64> {
    let v = values(&model.inner, v)?;
    klc_opi::bellman_residual(&model.inner, &v).map_err(err)
}

/// Returns `(v_star, pi_star, iterations, final_residual)`.
#[pyfunction]
#[pyo3(signature = (model, tol = 1e-8, max_iters = 100_000))]
fn value_iteration(model: &PyModel, tol: f64, max_iters: usize) -> PyResult<(Vec<f64>, PyPolicy, usize, f64)> {
    let report = klc_opi::value_iteration(&model.inner, tol, max_iters).map_err(err)?;
    Ok((
        report.v_star.into_inner(),
        PyPolicy { inner: report.pi_star },
        report.iterations,
        report.final_residual,
    ))
}

#[pyfunction]
fn exact_policy_evaluation(model: &PyModel, policy: &PyPolicy) -> PyResult<Vec<f64>> {
    let v = klc_opi::exact_policy_evaluation(&model.inner, &policy.inner).map_err(err)?;
    Ok(v.into_inner())
}

/// Runs the learner; returns a dict with the final values `v` and the
/// per-iteration `trace` (a list of dicts).
#[pyfunction]
#[pyo3(signature = (
    model, *, iterations = 3000, m = 20, batch = None, c0 = Some(50.0), seed = 0,
    expected = false, product_of_marginals = false, init = None, oracle = None, workers = None,
))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    model: &PyModel,
    iterations: usize,
    m: usize,
    batch: Option<usize>,
    c0: Option<f64>,
    seed: u64,
    expected: bool,
    product_of_marginals: bool,
    init: Option<Vec<f64>>,
    oracle: Option<Vec<f64>>,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let config = RunConfig {
        m,
        iterations,
        scheme: batch.map_or(Scheme::Sync, |batch| Scheme::Async { batch }),
        step: c0.map_or(StepSchedule::Unit, |c0| StepSchedule::Harmonic { c0 }),
        seed,
        mode: if expected { Mode::Expected } else { Mode::Sampled },
        sampling_rule: if product_of_marginals {
            SamplingRule::ProductOfMarginals
        } else {
            SamplingRule::Joint
        },
        init: match init {
            Some(v) => InitRule::Explicit(values(&model.inner, v)?),
            None => InitRule::UpperConstant,
        },
    };
    let oracle = oracle.map(|v| values(&model.inner, v)).transpose()?;
    let options = RunOptions {
        workers,
        keep_history: false,
    };
    let out = py
        .detach(|| learner::run(&model.inner, &config, oracle.as_ref(), &options))
        .map_err(err)?;

    let trace = out
        .trace
        .iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("k", row.k)?;
            d.set_item("sup_err_vstar", row.sup_err_vstar)?;
            d.set_item("bellman_residual", row.bellman_residual)?;
            d.set_item("mean_return", row.mean_return)?;
            d.set_item("alpha", row.alpha)?;
            d.set_item("d_size", row.d_size)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let result = PyDict::new(py);
    result.set_item("v", out.state.v.into_inner())?;
    result.set_item("trace", trace)?;
    Ok(result)
}

/// Returns `(mean, std)` of the episode return from `start`.
#[pyfunction]
#[pyo3(signature = (model, policy, start, *, seed, horizon = 20, episodes = 1000, discounted = false))]
fn monte_carlo_return(
    py: Python<'_>,
    model: &PyModel,
    policy: &PyPolicy,
    start: Vec<usize>,
    seed: u64,
    horizon: usize,
    episodes: usize,
    discounted: bool,
) -> PyResult<(f64, f64)> {
    let start = model.inner.space().encode(&start).map_err(err)?;
    let settings = EvalSettings {
        horizon,
        n_episodes: episodes,
        discounted,
        seed,
    };
    let stats = py
        .detach(|| metrics::monte_carlo_return(&model.inner, &policy.inner, start, &settings))
        .map_err(err)?;
    Ok((stats.mean, stats.std))
}

#[pymodule]
fn klc_opi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyPolicy>()?;
    m.add_function(wrap_pyfunction!(apply_optimal_operator, m)?)?;
    m.add_function(wrap_pyfunction!(apply_evaluation_operator, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_policy, m)?)?;
    m.add_function(wrap_pyfunction!(bellman_residual, m)?)?;
    m.add_function(wrap_pyfunction!(value_iteration, m)?)?;
    m.add_function(wrap_pyfunction!(exact_policy_evaluation, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_return, m)?)?;
    Ok(())
}
