//! Python module `subham`: builds linear damped systems and reconstructs
//! their substitute Hamiltonians. `run_config` drives a whole TOML run.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use subham_core::cli::{load_config, run_pipeline, Verb};
use subham_core::integrators::{integrate, integrate_hamiltonian, IntegratorConfig, Method};
use subham_core::model::{Matrix, State, SystemDefinition, Trajectory as CoreTrajectory, Vector};
use subham_core::reconstruction::{reconstruct, ReconstructionOptions, SubstituteSystem};
use subham_core::verification::{check_coincidence, AuditReport, Bound as Limit};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>], what: &str) -> PyResult<Matrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!("{what} must be a non-empty square matrix")));
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// `M q̈ + C q̇ + K q = 0`.
#[pyclass(name = "LinearSystem", frozen)]
struct PySystem {
    inner: SystemDefinition,
}

#[pymethods]
impl PySystem {
    #[new]
    #[pyo3(signature = (damping, stiffness, mass=None))]
    fn new(damping: Vec<Vec<f64>>, stiffness: Vec<Vec<f64>>, mass: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let mass = mass.map(|m| matrix(&m, "mass")).transpose()?;
        let inner =
            SystemDefinition::linear(mass, Some(matrix(&damping, "damping")?), matrix(&stiffness, "stiffness")?)
                .map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Kinetic plus potential energy at `(q, p)`.
    fn energy(&self, q: Vec<f64>, p: Vec<f64>) -> PyResult<f64> {
        self.inner.total_energy(&state(0.0, &q, &p, self.inner.dim())?).map_err(value_err)
    }

    /// Adaptive Dormand-Prince run sampled every `output_step`.
    #[pyo3(signature = (q0, p0, t_end, tol=1e-10, output_step=1e-3))]
    fn integrate(&self, q0: Vec<f64>, p0: Vec<f64>, t_end: f64, tol: f64, output_step: f64) -> PyResult<PyTrajectory> {
        let ic = state(0.0, &q0, &p0, self.inner.dim())?;
        let cfg = IntegratorConfig::rk45(t_end, tol).with_output_step(output_step);
        let inner = integrate(&self.inner, &ic, &cfg).map_err(runtime_err)?;
        Ok(PyTrajectory { inner })
    }
}

fn state(t: f64, q: &[f64], p: &[f64], n: usize) -> PyResult<State> {
    if q.len() != n || p.len() != n {
        return Err(PyValueError::new_err(format!("expected q and p of length {n}, got {} and {}", q.len(), p.len())));
    }
    Ok(State::from_slices(t, q, p))
}

#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    inner: CoreTrajectory,
}

#[pymethods]
impl PyTrajectory {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times().collect()
    }

    /// Positions, one row per sample.
    #[getter]
    fn q(&self) -> Vec<Vec<f64>> {
        self.inner.samples().iter().map(|s| s.q.as_slice().to_vec()).collect()
    }

    /// Momenta, one row per sample.
    #[getter]
    fn p(&self) -> Vec<Vec<f64>> {
        self.inner.samples().iter().map(|s| s.p.as_slice().to_vec()).collect()
    }

    /// Dense-output state `(q, p)` at `t`.
    fn state_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let s = self.inner.state_at(t);
        (s.q.as_slice().to_vec(), s.p.as_slice().to_vec())
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }
}

/// Conservative substitute reconstructed from one damped trajectory.
#[pyclass(name = "Substitute", frozen)]
struct PySubstitute {
    inner: SubstituteSystem,
}

impl PySubstitute {
    fn args(&self, t: f64, q: &[f64], p: &[f64]) -> PyResult<(Vec<usize>, Vector, Vector)> {
        let n = self.inner.dim();
        let s = state(t, q, p, n)?;
        Ok((self.inner.select_branches_at_time(t), s.q, s.p))
    }
}

#[pymethods]
impl PySubstitute {
    /// Branch count per coordinate.
    #[getter]
    fn branch_counts(&self) -> Vec<usize> {
        self.inner.branch_counts()
    }

    /// Substitute Hamiltonian at `(q, p)`, using the branches active at time `t`.
    fn hamiltonian(&self, t: f64, q: Vec<f64>, p: Vec<f64>) -> PyResult<f64> {
        let (sel, q, p) = self.args(t, &q, &p)?;
        self.inner.hamiltonian(&sel, &q, &p).map_err(value_err)
    }

    /// `(∂H/∂q, ∂H/∂p)` with the branches active at time `t`.
    fn gradient(&self, t: f64, q: Vec<f64>, p: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (sel, q, p) = self.args(t, &q, &p)?;
        let gq = self.inner.gradient_q(&sel, &q).map_err(value_err)?;
        Ok((gq.as_slice().to_vec(), self.inner.gradient_p(&p).as_slice().to_vec()))
    }

    /// Work potential of coordinate `i` on branch `b` at `q`.
    fn work(&self, i: usize, b: usize, q: f64) -> PyResult<f64> {
        let w = self.inner.potentials().get(i).ok_or_else(|| PyValueError::new_err("coordinate out of range"))?;
        w.value(b, q).map_err(value_err)
    }

    /// Gauss-Legendre run with fixed `step`.
    #[pyo3(signature = (q0, p0, t_end, step=1e-3))]
    fn integrate(&self, q0: Vec<f64>, p0: Vec<f64>, t_end: f64, step: f64) -> PyResult<PyTrajectory> {
        let ic = state(0.0, &q0, &p0, self.inner.dim())?;
        let cfg = IntegratorConfig::fixed(Method::Gauss4, t_end, step);
        let inner = integrate_hamiltonian(&self.inner, &ic, &cfg).map_err(runtime_err)?;
        Ok(PyTrajectory { inner })
    }
}

/// Reconstruct the substitute along `trajectory` of `system`.
#[pyfunction]
fn reconstruct_substitute(trajectory: &PyTrajectory, system: &PySystem) -> PyResult<PySubstitute> {
    let rec = reconstruct(&trajectory.inner, &system.inner, &ReconstructionOptions::default()).map_err(runtime_err)?;
    Ok(PySubstitute { inner: rec.substitute })
}

fn report_dict<'py>(py: Python<'py>, r: &AuditReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", r.name())?;
    d.set_item("pass", r.pass())?;
    let metrics = PyDict::new(py);
    for m in r.metrics() {
        let bound = match m.bound {
            Limit::AtMost(t) => ("at-most", Some(t)),
            Limit::AtLeast(t) => ("at-least", Some(t)),
            Limit::Info => ("info", None),
        };
        metrics.set_item(&m.name, (m.value, bound.0, bound.1))?;
    }
    d.set_item("metrics", metrics)?;
    d.set_item("notes", r.notes.clone())?;
    Ok(d)
}

/// Sup-norm phase distance audit between two trajectories.
#[pyfunction]
#[pyo3(signature = (original, substitute, tol=1e-6))]
fn coincidence<'py>(
    py: Python<'py>,
    original: &PyTrajectory,
    substitute: &PyTrajectory,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = check_coincidence(&original.inner, &substitute.inner, tol).map_err(value_err)?;
    report_dict(py, &r)
}

/// Run a TOML config like the `all` command; returns `(exit_code, reports)`.
#[pyfunction]
#[pyo3(signature = (config, out_dir, strict=false))]
fn run_config<'py>(
    py: Python<'py>,
    config: PathBuf,
    out_dir: PathBuf,
    strict: bool,
) -> PyResult<(i32, Vec<Bound<'py, PyDict>>)> {
    let parsed = load_config(&config, strict).map_err(value_err)?;
    let outcome = run_pipeline(&parsed.config, Verb::All, &out_dir).map_err(runtime_err)?;
    let reports = outcome.reports.iter().map(|r| report_dict(py, r)).collect::<PyResult<Vec<_>>>()?;
    Ok((outcome.exit_code(), reports))
}

#[pymodule]
fn subham(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PySubstitute>()?;
    m.add_function(wrap_pyfunction!(reconstruct_substitute, m)?)?;
    m.add_function(wrap_pyfunction!(coincidence, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
