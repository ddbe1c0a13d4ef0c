//! Python bindings. Operators cross the boundary as nested lists of Python
//! complex numbers, kets as flat lists, noise as lists of per-step rows.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use qsme_core::ensemble::{decompose_state, run_ensemble, DEFAULT_RANK_TOL};
use qsme_core::linalg::{self, Ket, Operator, C64};
use qsme_core::master::{self, PositivityPolicy};
use qsme_core::meanfield::{mckean_vlasov_solve, InteractionMap, MeanFieldConfig, MeanFieldMode};
use qsme_core::noise::IncrementTable;
use qsme_core::validation::{run_suite, trace_inequality_check, Suite, SuiteOptions};
use qsme_core::{pure, Error, Picture, WienerPath};
use serde_json::Value;

type Matrix = Vec<Vec<C64>>;

fn err(e: Error) -> PyErr {
    match e {
        Error::TrajectoryAbort { .. } | Error::InsufficientSamples { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_op(m: &Matrix) -> PyResult<Operator> {
    let d = m.len();
    if d == 0 || m.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("expected a nonempty square matrix"));
    }
    Ok(Operator::from_fn(d, d, |i, j| m[i][j]))
}

fn from_op(a: &Operator) -> Matrix {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

fn to_ket(v: &[C64]) -> PyResult<Ket> {
    if v.is_empty() {
        return Err(PyValueError::new_err("expected a nonempty vector"));
    }
    Ok(Ket::from_column_slice(v))
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for x in items {
                list.append(json_to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, x) in map {
                dict.set_item(k, json_to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn picture(name: &str, h: &Operator, dt: f64) -> PyResult<Picture> {
    match name {
        "schroedinger" => Ok(Picture::Schroedinger),
        "interaction" => Ok(Picture::Interaction),
        "auto" => Ok(Picture::auto(h, dt)),
        other => Err(PyValueError::new_err(format!("unknown picture '{other}'"))),
    }
}

/// Hamiltonian, measurement operators, step size and propagation picture.
#[pyclass(name = "SystemParams", module = "qsme", frozen)]
struct PySystemParams {
    inner: qsme_core::SystemParams,
}

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (hamiltonian, couplings, dt, picture="schroedinger"))]
    fn new(hamiltonian: Matrix, couplings: Vec<Matrix>, dt: f64, picture: &str) -> PyResult<Self> {
        let h = to_op(&hamiltonian)?;
        let ls = couplings.iter().map(to_op).collect::<PyResult<Vec<_>>>()?;
        let pic = self::picture(picture, &h, dt)?;
        Ok(Self { inner: qsme_core::SystemParams::new(h, ls, dt, pic).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    #[getter]
    fn picture(&self) -> &'static str {
        match self.inner.picture() {
            Picture::Schroedinger => "schroedinger",
            Picture::Interaction => "interaction",
        }
    }

    #[getter]
    fn hamiltonian(&self) -> Matrix {
        from_op(self.inner.hamiltonian())
    }

    #[getter]
    fn couplings(&self) -> Vec<Matrix> {
        self.inner.couplings().iter().map(from_op).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "SystemParams(dim={}, channels={}, dt={}, picture='{}')",
            self.dim(),
            self.channels(),
            self.dt(),
            self.picture()
        )
    }
}

#[pyfunction]
fn pauli_x() -> Matrix {
    from_op(&linalg::pauli_x())
}

#[pyfunction]
fn pauli_y() -> Matrix {
    from_op(&linalg::pauli_y())
}

#[pyfunction]
fn pauli_z() -> Matrix {
    from_op(&linalg::pauli_z())
}

#[pyfunction]
fn lowering_operator(dim: usize) -> Matrix {
    from_op(&linalg::lowering_operator(dim))
}

#[pyfunction]
fn min_eigenvalue(a: Matrix) -> PyResult<f64> {
    Ok(linalg::min_eigenvalue(&to_op(&a)?))
}

#[pyfunction]
fn trace_norm(a: Matrix) -> PyResult<f64> {
    Ok(linalg::trace_norm(&to_op(&a)?))
}

/// `Σ_j L_j γ L_j* − ½{L_j*L_j, γ}`.
#[pyfunction]
fn lindblad_generator(gamma: Matrix, couplings: Vec<Matrix>) -> PyResult<Matrix> {
    let ls = couplings.iter().map(to_op).collect::<PyResult<Vec<_>>>()?;
    Ok(from_op(&master::lindblad_generator(&to_op(&gamma)?, &ls).map_err(err)?))
}

#[pyfunction]
fn linear_sme_step(gamma: Matrix, params: &PySystemParams, t: f64, dy: Vec<f64>) -> PyResult<Matrix> {
    Ok(from_op(&master::linear_sme_step(&to_op(&gamma)?, &params.inner, t, &dy).map_err(err)?))
}

#[pyfunction]
fn nonlinear_sme_step(rho: Matrix, params: &PySystemParams, t: f64, db: Vec<f64>) -> PyResult<Matrix> {
    Ok(from_op(&master::nonlinear_sme_step(&to_op(&rho)?, &params.inner, t, &db).map_err(err)?))
}

#[pyfunction]
fn linear_pure_step(chi: Vec<C64>, params: &PySystemParams, t: f64, dy: Vec<f64>) -> PyResult<Vec<C64>> {
    Ok(pure::linear_pure_step(&to_ket(&chi)?, &params.inner, t, &dy).map_err(err)?.iter().copied().collect())
}

#[pyfunction]
fn nonlinear_pure_step(phi: Vec<C64>, params: &PySystemParams, t: f64, db: Vec<f64>) -> PyResult<Vec<C64>> {
    let step = pure::nonlinear_pure_step(&to_ket(&phi)?, &params.inner, t, &db).map_err(err)?;
    Ok(step.state.iter().copied().collect())
}

#[pyfunction]
fn deterministic_lindblad_solve(rho0: Matrix, params: &PySystemParams, t: f64) -> PyResult<Matrix> {
    Ok(from_op(&master::deterministic_lindblad_solve(&to_op(&rho0)?, &params.inner, t).map_err(err)?))
}

/// Brownian increments, one row of `channels` values per step.
#[pyfunction]
fn sample_wiener(channels: usize, steps: usize, dt: f64, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let w = WienerPath::sample(channels, steps, dt, seed).map_err(err)?;
    Ok(w.iter().map(<[f64]>::to_vec).collect())
}

fn table<'a>(params: &PySystemParams, rows: &'a [Vec<f64>]) -> PyResult<IncrementTable<'a>> {
    if rows.is_empty() || rows.iter().any(|r| r.len() != params.inner.channels()) {
        return Err(PyValueError::new_err("each increment row needs one value per channel"));
    }
    Ok(IncrementTable { dt: params.inner.dt(), rows })
}

/// Linear equation along explicit output increments; returns every state.
#[pyfunction]
fn run_linear_sme(params: &PySystemParams, gamma0: Matrix, increments: Vec<Vec<f64>>) -> PyResult<Vec<Matrix>> {
    let mut out = Vec::new();
    master::run_linear_sme(&params.inner, &to_op(&gamma0)?, &table(params, &increments)?, 1, |_, _, g| {
        out.push(from_op(g))
    })
    .map_err(err)?;
    Ok(out)
}

/// Normalized equation along explicit innovation increments; returns every state.
#[pyfunction]
#[pyo3(signature = (params, rho0, increments, positivity="monitor"))]
fn run_nonlinear_sme(
    params: &PySystemParams,
    rho0: Matrix,
    increments: Vec<Vec<f64>>,
    positivity: &str,
) -> PyResult<Vec<Matrix>> {
    let policy = match positivity {
        "monitor" => PositivityPolicy::Monitor,
        "ignore" => PositivityPolicy::Ignore,
        "project" => PositivityPolicy::Project,
        other => return Err(PyValueError::new_err(format!("unknown positivity policy '{other}'"))),
    };
    let mut out = Vec::new();
    master::run_nonlinear_sme(&params.inner, &to_op(&rho0)?, &table(params, &increments)?, policy, 1, |_, _, r| {
        out.push(from_op(r))
    })
    .map_err(err)?;
    Ok(out)
}

/// Weighted-ensemble unraveling along explicit innovation increments.
#[pyfunction]
#[pyo3(signature = (params, rho0, increments, rank_tol=DEFAULT_RANK_TOL))]
fn run_ensemble_unraveling(
    params: &PySystemParams,
    rho0: Matrix,
    increments: Vec<Vec<f64>>,
    rank_tol: f64,
) -> PyResult<Vec<Matrix>> {
    let mut out = Vec::new();
    run_ensemble(&params.inner, &to_op(&rho0)?, &table(params, &increments)?, rank_tol, 1, |_, _, r| {
        out.push(from_op(r))
    })
    .map_err(err)?;
    Ok(out)
}

/// `(weights, kets)` of the spectral decomposition, largest weight first.
#[pyfunction]
#[pyo3(signature = (rho0, rank_tol=DEFAULT_RANK_TOL))]
fn decompose(rho0: Matrix, rank_tol: f64) -> PyResult<(Vec<f64>, Vec<Vec<C64>>)> {
    let ens = decompose_state(&to_op(&rho0)?, rank_tol).map_err(err)?;
    Ok((ens.weights, ens.kets.iter().map(|k| k.iter().copied().collect()).collect()))
}

/// Monte Carlo mean of the normalized equation: `(times, means, hs_stderr)`.
#[pyfunction]
#[pyo3(signature = (params, rho0, steps, trajectories, seed, stride=1))]
fn monte_carlo_mean(
    py: Python<'_>,
    params: &PySystemParams,
    rho0: Matrix,
    steps: usize,
    trajectories: usize,
    seed: u64,
    stride: usize,
) -> PyResult<(Vec<f64>, Vec<Matrix>, Vec<f64>)> {
    let rho0 = to_op(&rho0)?;
    let p = params.inner.clone();
    let mp = py
        .detach(|| master::monte_carlo_mean_path(&p, &rho0, steps, trajectories, seed, stride))
        .map_err(err)?;
    Ok((mp.times, mp.mean.iter().map(from_op).collect(), mp.stderr))
}

/// Picard solution of the mean-field equation; returns the report as a dict.
///
/// `interaction` is `None`, `("potential", table)` with a real symmetric
/// table, or `("hs_kernel", kernel)` with a d²×d² complex kernel.
#[pyfunction]
#[pyo3(signature = (params, rho0, horizon, trajectories, seed, interaction=None, picard_max_iter=50, picard_tol=1e-8, linear=false, conjugate=false))]
#[allow(clippy::too_many_arguments)]
fn mean_field_solve<'py>(
    py: Python<'py>,
    params: &PySystemParams,
    rho0: Matrix,
    horizon: f64,
    trajectories: usize,
    seed: u64,
    interaction: Option<(String, Matrix)>,
    picard_max_iter: usize,
    picard_tol: f64,
    linear: bool,
    conjugate: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let interaction = match interaction {
        None => InteractionMap::Zero,
        Some((kind, m)) => {
            let op = to_op(&m)?;
            match kind.as_str() {
                "potential" => InteractionMap::potential(op.map(|z| z.re)).map_err(err)?,
                "hs_kernel" => InteractionMap::hs_kernel(op).map_err(err)?,
                other => return Err(PyValueError::new_err(format!("unknown interaction '{other}'"))),
            }
        }
    };
    let cfg = MeanFieldConfig {
        base: params.inner.clone(),
        interaction,
        rho0: to_op(&rho0)?,
        trajectories,
        horizon,
        picard_max_iter,
        picard_tol,
        mode: if linear { MeanFieldMode::Linear } else { MeanFieldMode::Normalized },
        seed,
        conjugate,
    };
    let report = py.detach(|| mckean_vlasov_solve(&cfg)).map_err(err)?;
    json_to_py(py, &report.to_json(1))
}

/// Runs a pinned-seed validation suite and returns its report as a dict.
#[pyfunction]
#[pyo3(signature = (suite, seed=None))]
fn check<'py>(py: Python<'py>, suite: &str, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let suite: Suite = suite.parse().map_err(err)?;
    let mut opts = SuiteOptions::default();
    if let Some(s) = seed {
        opts.seed = s;
    }
    let report = py.detach(|| run_suite(suite, opts)).map_err(err)?;
    json_to_py(py, &serde_json::to_value(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?)
}

/// `(pass, worst lhs/rhs)` over the three trace inequalities for `(A, B)`.
#[pyfunction]
fn trace_inequalities(a: Matrix, b: Matrix) -> PyResult<(bool, f64)> {
    let r = trace_inequality_check(&to_op(&a)?, &to_op(&b)?).map_err(err)?;
    Ok((r.pass, r.worst_ratio()))
}

#[pymodule]
fn qsme(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add_function(wrap_pyfunction!(pauli_x, m)?)?;
    m.add_function(wrap_pyfunction!(pauli_y, m)?)?;
    m.add_function(wrap_pyfunction!(pauli_z, m)?)?;
    m.add_function(wrap_pyfunction!(lowering_operator, m)?)?;
    m.add_function(wrap_pyfunction!(min_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(trace_norm, m)?)?;
    m.add_function(wrap_pyfunction!(lindblad_generator, m)?)?;
    m.add_function(wrap_pyfunction!(linear_sme_step, m)?)?;
    m.add_function(wrap_pyfunction!(nonlinear_sme_step, m)?)?;
    m.add_function(wrap_pyfunction!(linear_pure_step, m)?)?;
    m.add_function(wrap_pyfunction!(nonlinear_pure_step, m)?)?;
    m.add_function(wrap_pyfunction!(deterministic_lindblad_solve, m)?)?;
    m.add_function(wrap_pyfunction!(sample_wiener, m)?)?;
    m.add_function(wrap_pyfunction!(run_linear_sme, m)?)?;
    m.add_function(wrap_pyfunction!(run_nonlinear_sme, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble_unraveling, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_mean, m)?)?;
    m.add_function(wrap_pyfunction!(mean_field_solve, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(trace_inequalities, m)?)?;
    Ok(())
}
