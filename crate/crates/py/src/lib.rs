//! Python bindings. Reports are returned as plain dictionaries built
//! from the same JSON the command-line tool writes.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use engine::model::{Pi0Prior, Tuning, DEFAULT_SEED};
use engine::sim::{run_benchmark, BenchmarkConfig, Method};
use engine::{make_design, Error, SamplerConfig};

fn to_py_err(e: Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_dict<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse_method(name: &str) -> PyResult<Method> {
    name.parse().map_err(to_py_err)
}

#[allow(clippy::too_many_arguments)]
fn sampler_config(
    n_iter: usize,
    n_burn: usize,
    seed: u64,
    em_rounds: usize,
    em_iters: usize,
    fix_lambda: Option<f64>,
    pi0: Option<f64>,
) -> PyResult<SamplerConfig> {
    let mut c = SamplerConfig { n_iter, n_burn, seed, em_rounds, em_inner_iters: em_iters, ..SamplerConfig::default() };
    if let Some(v) = fix_lambda {
        c.bgl.lambda = Tuning::Fixed { value: v };
    }
    if let Some(v) = pi0 {
        c.bgl.pi0 = Pi0Prior::Fixed { value: v };
    }
    c.validate().map_err(to_py_err)?;
    Ok(c)
}

/// Fit one method to a response vector and a row-major covariate matrix
/// whose columns are ordered by group.
#[pyfunction]
#[pyo3(signature = (y, x, group_sizes, method = "bgl-ss", *, n_iter = 10_000, n_burn = 5_000, seed = DEFAULT_SEED,
                    em_rounds = 20, em_iters = 1_000, fix_lambda = None, pi0 = None, standardize = true))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    group_sizes: Vec<usize>,
    method: &str,
    n_iter: usize,
    n_burn: usize,
    seed: u64,
    em_rounds: usize,
    em_iters: usize,
    fix_lambda: Option<f64>,
    pi0: Option<f64>,
    standardize: bool,
) -> PyResult<Py<PyAny>> {
    let method = parse_method(method)?;
    let config = sampler_config(n_iter, n_burn, seed, em_rounds, em_iters, fix_lambda, pi0)?;
    let design = make_design(&y, &x, &group_sizes).map_err(to_py_err)?;
    let report = py
        .detach(|| engine::report::fit_report(method, &design, &config, standardize))
        .map_err(to_py_err)?;
    to_dict(py, &report)
}

/// Replicated simulation study on the built-in examples.
#[pyfunction]
#[pyo3(signature = (examples, methods, reps = 50, *, n_iter = 10_000, n_burn = 5_000, seed = DEFAULT_SEED,
                    em_rounds = 20, em_iters = 1_000, boot_reps = 1_000))]
#[allow(clippy::too_many_arguments)]
fn benchmark(
    py: Python<'_>,
    examples: Vec<usize>,
    methods: Vec<String>,
    reps: usize,
    n_iter: usize,
    n_burn: usize,
    seed: u64,
    em_rounds: usize,
    em_iters: usize,
    boot_reps: usize,
) -> PyResult<Py<PyAny>> {
    let methods = methods.iter().map(|m| parse_method(m)).collect::<PyResult<Vec<_>>>()?;
    let sampler = sampler_config(n_iter, n_burn, seed, em_rounds, em_iters, None, None)?;
    let mut config = BenchmarkConfig::new(examples, methods, reps, sampler);
    config.boot_reps = boot_reps;
    config.validate().map_err(to_py_err)?;
    let report = py.detach(|| run_benchmark(&config)).map_err(to_py_err)?;
    to_dict(py, &report)
}

/// Draw one training/test split of a built-in example. Returns
/// `(y_train, x_train, y_test, x_test, group_sizes, true_coefficients)`.
#[pyfunction]
#[pyo3(signature = (example, seed = DEFAULT_SEED))]
#[allow(clippy::type_complexity)]
fn generate_example(
    example: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>, Vec<usize>, Vec<f64>)> {
    let mut rng = engine::dists::RngStream::new(seed, 0);
    let data = engine::sim::generate_example(example, &mut rng).map_err(to_py_err)?;
    let rows = |d: &engine::GroupedDesign| -> Vec<Vec<f64>> {
        (0..d.n()).map(|i| d.x().row(i).iter().copied().collect()).collect()
    };
    Ok((
        data.train.y().iter().copied().collect(),
        rows(&data.train),
        data.test.y().iter().copied().collect(),
        rows(&data.test),
        data.train.group_sizes().to_vec(),
        data.beta.values().to_vec(),
    ))
}

/// Names accepted by the `method` arguments.
#[pyfunction]
fn methods() -> Vec<&'static str> {
    Method::ALL.iter().map(|m| m.name()).collect()
}

#[pymodule]
fn spikeslab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("DEFAULT_SEED", DEFAULT_SEED)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(generate_example, m)?)?;
    m.add_function(wrap_pyfunction!(methods, m)?)?;
    Ok(())
}
