//! Python module `clamr`. Partitions cross the boundary as lists of integer
//! labels; data as lists of rows with `None` (or NaN) for missing cells.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use clamr::gibbs::{pooled_partitions, worker_count};
use clamr::influence::bayes_factor;
use clamr::io::SpecFile;
use clamr::synth::{simulate as simulate_scenario, ScenarioKind, SimScenario};
use clamr::{
    point_estimate, run_chains, CandidateSet, ClamrError, Dataset, Loss, McmcSettings, MrInterval, Partition,
    SamplerKind, VarianceMode,
};

fn py_err(e: ClamrError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn partition(labels: &[i64]) -> PyResult<Partition> {
    let labels = labels
        .iter()
        .map(|&l| usize::try_from(l).map_err(|_| PyValueError::new_err("labels must be non-negative")))
        .collect::<PyResult<Vec<_>>>()?;
    Ok(Partition::from_labels(&labels))
}

fn dataset(rows: Vec<Vec<Option<f64>>>, names: Vec<String>) -> PyResult<Dataset> {
    let n = rows.len();
    let p = names.len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("every row needs one value per feature name"));
    }
    let mut values = Vec::with_capacity(n * p);
    let mut missing = Vec::with_capacity(n * p);
    for v in rows.into_iter().flatten() {
        let absent = v.is_none_or(f64::is_nan);
        missing.push(absent);
        values.push(if absent { 0.0 } else { v.unwrap_or(0.0) });
    }
    Dataset::new(n, p, values, missing, names).map_err(py_err)
}

/// Kernel mean and variance putting mass `omega` inside `[lower, upper]`.
#[pyfunction]
#[pyo3(signature = (lower, upper, omega = 0.95))]
fn default_center_hyperparams(lower: f64, upper: f64, omega: f64) -> PyResult<(f64, f64)> {
    clamr::default_center_hyperparams(&MrInterval::new(lower, upper, ""), omega).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (k, n, gamma = 1.0, components = 10, epsilon = 0.1, target = 0.5, tolerance = 0.01, mc_samples = 20000, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn calibrate_rho(
    py: Python<'_>,
    k: usize,
    n: usize,
    gamma: f64,
    components: usize,
    epsilon: f64,
    target: f64,
    tolerance: f64,
    mc_samples: usize,
    seed: u64,
) -> PyResult<f64> {
    py.detach(|| {
        clamr::influence::calibrate_rho(k, gamma, components, n, epsilon, target, tolerance, mc_samples, seed)
    })
    .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (rho, k, n, gamma = 1.0, components = 10, epsilon = 0.1, mc_samples = 20000, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn prior_null_probability(
    py: Python<'_>,
    rho: f64,
    k: usize,
    n: usize,
    gamma: f64,
    components: usize,
    epsilon: f64,
    mc_samples: usize,
    seed: u64,
) -> PyResult<f64> {
    py.detach(|| clamr::influence::prior_null_probability(rho, k, gamma, components, n, epsilon, mc_samples, seed))
        .map_err(py_err)
}

#[pyfunction]
fn adjusted_rand(a: Vec<i64>, b: Vec<i64>) -> PyResult<f64> {
    clamr::adjusted_rand(&partition(&a)?, &partition(&b)?).map_err(py_err)
}

#[pyfunction]
fn vi_distance(a: Vec<i64>, b: Vec<i64>) -> PyResult<f64> {
    clamr::vi_distance(&partition(&a)?, &partition(&b)?).map_err(py_err)
}

#[pyfunction]
fn binder_distance(a: Vec<i64>, b: Vec<i64>) -> PyResult<f64> {
    clamr::binder_distance(&partition(&a)?, &partition(&b)?).map_err(py_err)
}

type Simulated = (Vec<Vec<f64>>, Vec<usize>, Vec<String>, String);

/// Returns `(rows, labels, feature_names, spec_json)` with 1-based labels.
#[pyfunction]
#[pyo3(signature = (scenario, n, seed = 1))]
fn simulate(scenario: &str, n: usize, seed: u64) -> PyResult<Simulated> {
    let kind: ScenarioKind = scenario.parse().map_err(py_err)?;
    let sc = SimScenario::new(kind, n, seed);
    let (data, truth) = simulate_scenario(&sc).map_err(py_err)?;
    let rows = (0..data.n()).map(|i| data.row(i).to_vec()).collect();
    let spec = SpecFile::from_mr_specs(&sc.regions, VarianceMode::Simulation).to_json().map_err(py_err)?;
    Ok((rows, truth.partition().one_based(), data.feature_names().to_vec(), spec))
}

/// Fits the model and returns a dict with the point estimate (1-based
/// labels), its expected loss, the `rho` used per feature and, for the
/// region-prior sampler, per-feature Bayes factors.
#[pyfunction]
#[pyo3(signature = (rows, feature_names, spec_json, iterations = 5000, burn_in = 1000, thin = 5, chains = 1, seed = 1, sampler = "clamr", loss = "vi", epsilon = 0.1, mc_samples = 20000))]
#[allow(clippy::too_many_arguments)]
fn fit<'py>(
    py: Python<'py>,
    rows: Vec<Vec<Option<f64>>>,
    feature_names: Vec<String>,
    spec_json: &str,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    chains: usize,
    seed: u64,
    sampler: &str,
    loss: &str,
    epsilon: f64,
    mc_samples: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let data = dataset(rows, feature_names)?;
    let spec = SpecFile::from_json(spec_json).map_err(py_err)?;
    let kind: SamplerKind = sampler.parse().map_err(py_err)?;
    let loss: Loss = loss.parse().map_err(py_err)?;
    let mcmc = McmcSettings {
        iterations,
        burn_in,
        thin,
        chains,
        seed,
        ..McmcSettings::default()
    };
    let names = data.feature_names().to_vec();
    let result = py.detach(|| -> clamr::Result<_> {
        let rhos = spec.resolve_rhos(&names, data.n(), epsilon, mc_samples, seed)?;
        let cfg = spec.model_config(&names, &rhos, mcmc)?;
        let draws = run_chains(&cfg, &data, kind, worker_count())?;
        let est = point_estimate(&pooled_partitions(&draws), loss, CandidateSet::Draws)?;
        let bfs = match kind {
            SamplerKind::Clamr => Some(
                (0..names.len())
                    .map(|j| bayes_factor(&draws, j, epsilon))
                    .collect::<clamr::Result<Vec<_>>>()?,
            ),
            SamplerKind::Bgmm => None,
        };
        Ok((rhos, est, bfs))
    });
    let (rhos, est, bfs) = result.map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("point_estimate", est.partition.one_based())?;
    out.set_item("n_clusters", est.partition.n_blocks())?;
    out.set_item("expected_loss", est.expected_loss)?;
    out.set_item("rho", rhos)?;
    out.set_item("bayes_factors", bfs)?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "clamr")]
fn clamr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_center_hyperparams, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_rho, m)?)?;
    m.add_function(wrap_pyfunction!(prior_null_probability, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand, m)?)?;
    m.add_function(wrap_pyfunction!(vi_distance, m)?)?;
    m.add_function(wrap_pyfunction!(binder_distance, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    Ok(())
}
