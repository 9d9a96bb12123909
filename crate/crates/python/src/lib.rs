//! Python surface for the tomography pipeline. States cross the boundary as
//! nested lists of complex numbers (row major); everything heavier stays in
//! Rust and releases the interpreter lock while it runs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::exceptions::{PyNotImplementedError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tomo_core::hilbert::{fidelity, sample_hilbert_schmidt, DensityMatrix};
use tomo_core::likelihood::{bloch_density_grid, MeasurementRecord};
use tomo_core::moments::MomentSource;
use tomo_core::region::{ConfidenceRegion, Membership};
use tomo_core::simulator::coverage_experiment;
use tomo_core::wire::{coverage_config_from_json, record_from_json, record_to_json, CoverageReportDto};
use tomo_core::TomoError;

fn to_py(err: TomoError) -> PyErr {
    match &err {
        TomoError::Estimation(_) | TomoError::SummaryMismatch(_) => {
            PyRuntimeError::new_err(err.to_string())
        }
        TomoError::Unsupported(_) => PyNotImplementedError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

type StateRows = Vec<Vec<Complex64>>;

fn matrix_from_rows(rows: &StateRows) -> PyResult<DMatrix<Complex64>> {
    let dim = rows.len();
    if dim == 0 || rows.iter().any(|r| r.len() != dim) {
        return Err(PyValueError::new_err("state must be a square, non-empty matrix"));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

fn state_from_rows(rows: StateRows) -> PyResult<DensityMatrix> {
    DensityMatrix::new(matrix_from_rows(&rows)?).map_err(to_py)
}

fn rows_from_state(state: &DensityMatrix) -> StateRows {
    let m = state.matrix();
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// A named measurement with positive elements summing to the identity.
#[pyclass(name = "Povm", frozen)]
struct PyPovm(tomo_core::hilbert::Povm);

#[pymethods]
impl PyPovm {
    /// Six-outcome Pauli measurement (I +- sigma_a)/6.
    #[staticmethod]
    fn pauli_six() -> Self {
        PyPovm(tomo_core::hilbert::Povm::pauli_six())
    }

    /// Two-outcome computational-basis measurement.
    #[staticmethod]
    fn z_basis() -> Self {
        PyPovm(tomo_core::hilbert::Povm::z_basis())
    }

    /// Half-weight z and y projectors (the four-outcome split-shot design).
    #[staticmethod]
    fn half_zy() -> Self {
        PyPovm(tomo_core::hilbert::Povm::half_zy())
    }

    /// The trivial single-outcome measurement {I} in dimension `dim`.
    #[staticmethod]
    fn trivial(dim: usize) -> Self {
        PyPovm(tomo_core::hilbert::Povm::trivial(dim))
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.0.labels().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.elements().len()
    }

    fn __repr__(&self) -> String {
        format!("Povm(dim={}, outcomes={})", self.0.dim(), self.0.elements().len())
    }
}

/// Outcome counts for one POVM.
#[pyclass(name = "Record", frozen)]
struct PyRecord(MeasurementRecord);

#[pymethods]
impl PyRecord {
    #[new]
    fn new(povm: &PyPovm, counts: Vec<u64>) -> PyResult<Self> {
        MeasurementRecord::new(povm.0.clone(), counts).map(PyRecord).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        record_from_json(text).map(PyRecord).map_err(to_py)
    }

    fn to_json(&self) -> String {
        record_to_json(&self.0)
    }

    #[getter]
    fn counts(&self) -> Vec<u64> {
        self.0.counts().to_vec()
    }

    #[getter]
    fn n(&self) -> u64 {
        self.0.n()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn povm(&self) -> PyPovm {
        PyPovm(self.0.povm().clone())
    }

    fn __repr__(&self) -> String {
        format!("Record(n={}, outcomes={:?})", self.0.n(), self.0.counts())
    }
}

/// Iterative likelihood maximization result.
#[pyclass(name = "MleResult", frozen)]
struct PyMle {
    #[pyo3(get)]
    log_likelihood: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    stationarity_residual: f64,
    #[pyo3(get)]
    boundary: bool,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    ambiguous: bool,
    estimate: StateRows,
}

#[pymethods]
impl PyMle {
    #[getter]
    fn estimate(&self) -> StateRows {
        self.estimate.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "MleResult(log_likelihood={:.6}, iterations={}, converged={})",
            self.log_likelihood, self.iterations, self.converged
        )
    }
}

/// Monte Carlo estimate of the density normalization constant.
#[pyclass(name = "Normalization", frozen)]
struct PyNormalization {
    #[pyo3(get)]
    log_c: f64,
    #[pyo3(get)]
    log_c_stderr: f64,
    #[pyo3(get)]
    sample_count: usize,
    #[pyo3(get)]
    seed: u64,
}

/// Likelihood level set with enlargement radius and stored witnesses.
#[pyclass(name = "Region", frozen)]
struct PyRegion(ConfidenceRegion);

#[pymethods]
impl PyRegion {
    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta()
    }

    #[getter]
    fn log_lambda_star(&self) -> f64 {
        self.0.log_lambda_star()
    }

    #[getter]
    fn mass_estimate(&self) -> f64 {
        self.0.mass_estimate()
    }

    #[getter]
    fn mass_stderr(&self) -> f64 {
        self.0.mass_stderr()
    }

    #[getter]
    fn witness_count(&self) -> usize {
        self.0.witnesses().len()
    }

    /// Membership of a state in the enlarged region: "inside", "outside", or
    /// "boundary-uncertain".
    #[pyo3(signature = (state, probes = 8))]
    fn contains(&self, py: Python<'_>, state: StateRows, probes: usize) -> PyResult<String> {
        let sigma = state_from_rows(state)?;
        let verdict = py.detach(|| self.0.contains(&sigma, probes)).map_err(to_py)?;
        Ok(match verdict {
            Membership::Inside => "inside",
            Membership::Outside => "outside",
            Membership::BoundaryUncertain => "boundary-uncertain",
        }
        .to_string())
    }

    /// Witness-pair diameter in the POVM seminorm.
    fn extent(&self, py: Python<'_>, povm: &PyPovm) -> PyResult<f64> {
        py.detach(|| self.0.extent(&povm.0)).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Region(epsilon={}, delta={:.4}, witnesses={})",
            self.0.epsilon(),
            self.0.delta(),
            self.0.witnesses().len()
        )
    }
}

/// Density matrix with Bloch vector (x, y, z), as nested complex lists.
#[pyfunction]
fn state_from_bloch(x: f64, y: f64, z: f64) -> PyResult<StateRows> {
    DensityMatrix::from_bloch(x, y, z).map(|s| rows_from_state(&s)).map_err(to_py)
}

/// Draw a Hilbert-Schmidt random density matrix.
#[pyfunction]
fn random_state(dim: usize, seed: u64) -> PyResult<StateRows> {
    if dim == 0 {
        return Err(PyValueError::new_err("dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rows_from_state(&sample_hilbert_schmidt(dim, &mut rng)))
}

/// Root fidelity F(a, b).
#[pyfunction(name = "fidelity")]
fn fidelity_py(a: StateRows, b: StateRows) -> PyResult<f64> {
    fidelity(&state_from_rows(a)?, &state_from_rows(b)?).map_err(to_py)
}

/// Log-likelihood of a state under a record.
#[pyfunction]
fn log_likelihood(record: &PyRecord, state: StateRows) -> PyResult<f64> {
    tomo_core::likelihood::log_likelihood(&record.0, &state_from_rows(state)?).map_err(to_py)
}

/// Sample counts from a state measured by `povm`, `n` shots.
#[pyfunction]
fn simulate(state: StateRows, povm: &PyPovm, n: u64, seed: u64) -> PyResult<PyRecord> {
    let sigma = state_from_rows(state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tomo_core::simulator::simulate_record(&sigma, &povm.0, n, &mut rng)
        .map(PyRecord)
        .map_err(to_py)
}

/// Iterate the likelihood to its maximizer.
#[pyfunction(signature = (record, tol = 1e-10, max_iter = 20_000))]
fn mle_estimate(py: Python<'_>, record: &PyRecord, tol: f64, max_iter: usize) -> PyResult<PyMle> {
    let result = py.detach(|| tomo_core::mle::mle_estimate(&record.0, tol, max_iter)).map_err(to_py)?;
    Ok(PyMle {
        log_likelihood: result.log_likelihood_value,
        iterations: result.iterations,
        stationarity_residual: result.stationarity_residual,
        boundary: result.boundary_flag,
        converged: result.converged,
        ambiguous: result.ambiguous,
        estimate: rows_from_state(&result.estimate),
    })
}

/// Monte Carlo normalization constant of the likelihood density.
#[pyfunction]
fn normalization_constant(
    py: Python<'_>,
    record: &PyRecord,
    samples: usize,
    seed: u64,
) -> PyResult<PyNormalization> {
    let summary = py
        .detach(|| tomo_core::likelihood::normalization_constant(&record.0, samples, seed))
        .map_err(to_py)?;
    Ok(PyNormalization {
        log_c: summary.log_c(),
        log_c_stderr: summary.log_c_stderr(),
        sample_count: summary.sample_count(),
        seed: summary.seed(),
    })
}

/// Build the confidence region for a record.
#[pyfunction]
fn build_region(
    py: Python<'_>,
    record: &PyRecord,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> PyResult<PyRegion> {
    py.detach(|| tomo_core::region::build_region(&record.0, epsilon, samples, seed))
        .map(PyRegion)
        .map_err(to_py)
}

/// Harmonic moments of a single-basis record's posterior, as
/// (l, m, coefficient) triples.
#[pyfunction]
fn expand_record(record: &PyRecord, l_max: usize) -> PyResult<Vec<(usize, i64, Complex64)>> {
    let mv = tomo_core::moments::expand_record(&MomentSource::Record(record.0.clone()), l_max)
        .map_err(to_py)?;
    Ok(moment_triples(&mv))
}

/// Harmonic moments of a covariant outcome |x><x|^n at chart angles.
#[pyfunction]
fn expand_covariant(n: u64, theta: f64, phi: f64, l_max: usize) -> PyResult<Vec<(usize, i64, Complex64)>> {
    let mv = tomo_core::moments::expand_record(&MomentSource::Covariant { n, theta, phi }, l_max)
        .map_err(to_py)?;
    Ok(moment_triples(&mv))
}

fn moment_triples(mv: &tomo_core::moments::MomentVector) -> Vec<(usize, i64, Complex64)> {
    let mut out = Vec::new();
    for l in 0..=mv.l_max() {
        for m in -(l as i64)..=(l as i64) {
            out.push((l, m, mv.coeff(l, m)));
        }
    }
    out
}

/// Density CSV over a Bloch grid (see the CLI's bloch subcommand).
#[pyfunction(signature = (record, resolution, surface, samples, seed))]
fn bloch_grid_csv(
    py: Python<'_>,
    record: &PyRecord,
    resolution: usize,
    surface: bool,
    samples: usize,
    seed: u64,
) -> PyResult<String> {
    py.detach(|| {
        let summary = tomo_core::likelihood::normalization_constant(&record.0, samples, seed)?;
        let grid = bloch_density_grid(&record.0, resolution, surface, &summary)?;
        Ok(grid.to_csv())
    })
    .map_err(to_py)
}

/// Run a coverage experiment from config JSON; returns report JSON.
#[pyfunction]
fn coverage_experiment_json(py: Python<'_>, config: &str) -> PyResult<String> {
    let config = coverage_config_from_json(config).map_err(to_py)?;
    let report = py.detach(|| coverage_experiment(&config)).map_err(to_py)?;
    serde_json::to_string_pretty(&CoverageReportDto::from_report(&report))
        .map_err(|err| PyRuntimeError::new_err(err.to_string()))
}

#[pymodule]
fn pytomo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPovm>()?;
    m.add_class::<PyRecord>()?;
    m.add_class::<PyMle>()?;
    m.add_class::<PyNormalization>()?;
    m.add_class::<PyRegion>()?;
    m.add_function(wrap_pyfunction!(state_from_bloch, m)?)?;
    m.add_function(wrap_pyfunction!(random_state, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_py, m)?)?;
    m.add_function(wrap_pyfunction!(log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(mle_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(normalization_constant, m)?)?;
    m.add_function(wrap_pyfunction!(build_region, m)?)?;
    m.add_function(wrap_pyfunction!(expand_record, m)?)?;
    m.add_function(wrap_pyfunction!(expand_covariant, m)?)?;
    m.add_function(wrap_pyfunction!(bloch_grid_csv, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_experiment_json, m)?)?;
    Ok(())
}
