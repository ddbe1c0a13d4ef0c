use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use super::{check_unit_trace, linear_sme_increment, measurement_compensator, nonlinear_sme_increment};
use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{check_density, check_finite, min_eigenvalue, project_to_density, trace, Operator, C64, DEFAULT_POS_TOL};
use crate::montecarlo::{ordered_fold, OperatorMoments};
use crate::noise::{Driver, WienerPath};
use crate::system::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Linear,
    Normalized,
}

/// What the normalized runner does about negative eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityPolicy {
    Ignore,
    /// Track the most negative eigenvalue seen.
    #[default]
    Monitor,
    /// Clip negative eigenvalues and renormalize. Changes the law of the process.
    Project,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Final state in the Schrödinger picture.
    pub final_state: Operator,
    pub final_trace: f64,
    /// Most negative eigenvalue observed (only under [`PositivityPolicy::Monitor`]).
    pub worst_eigenvalue: Option<f64>,
    pub projections: usize,
}

fn abort(step: usize, reason: impl Into<String>) -> Error {
    Error::TrajectoryAbort {
        step,
        reason: reason.into(),
    }
}

fn check_driver<D: Driver + ?Sized>(params: &SystemParams, driver: &D) -> Result<()> {
    ensure_dim(params.channels(), driver.channels())?;
    if (driver.dt() - params.dt()).abs() > 1e-12 * params.dt() {
        return Err(Error::InvalidParameter(format!(
            "driver step {} differs from dt {}",
            driver.dt(),
            params.dt()
        )));
    }
    Ok(())
}

/// Integrates the linear equation along the output increments supplied by
/// `driver`, calling `observe(step, t, γ_lab)` every `stride` steps and at the end.
pub fn run_linear_sme<D, F>(
    params: &SystemParams,
    gamma0: &Operator,
    driver: &D,
    stride: usize,
    mut observe: F,
) -> Result<RunSummary>
where
    D: Driver + ?Sized,
    F: FnMut(usize, f64, &Operator),
{
    ensure_dim(params.dim(), gamma0.nrows())?;
    ensure_dim(params.dim(), gamma0.ncols())?;
    check_driver(params, driver)?;
    let stride = stride.max(1);
    let dt = params.dt();
    let steps = driver.steps();
    let mut state = params.from_lab(gamma0, 0.0);
    observe(0, 0.0, gamma0);
    for k in 0..steps {
        let t = k as f64 * dt;
        state = linear_sme_increment(&params.frame(t), &state, dt, &driver.increment_at(k));
        if !check_finite(&state) {
            return Err(abort(k + 1, "non-finite state"));
        }
        if (k + 1) % stride == 0 || k + 1 == steps {
            let t1 = (k + 1) as f64 * dt;
            observe(k + 1, t1, &params.to_lab(&state, t1));
        }
    }
    let t_end = steps as f64 * dt;
    let final_state = params.to_lab(&state, t_end);
    Ok(RunSummary {
        final_trace: trace(&final_state).re,
        final_state,
        worst_eigenvalue: None,
        projections: 0,
    })
}

/// Integrates the normalized equation along the innovation increments supplied by `driver`.
pub fn run_nonlinear_sme<D, F>(
    params: &SystemParams,
    rho0: &Operator,
    driver: &D,
    policy: PositivityPolicy,
    stride: usize,
    mut observe: F,
) -> Result<RunSummary>
where
    D: Driver + ?Sized,
    F: FnMut(usize, f64, &Operator),
{
    ensure_dim(params.dim(), rho0.nrows())?;
    check_density(rho0, DEFAULT_POS_TOL)?;
    check_driver(params, driver)?;
    let stride = stride.max(1);
    let dt = params.dt();
    let steps = driver.steps();
    let mut state = params.from_lab(rho0, 0.0);
    let mut worst = match policy {
        PositivityPolicy::Monitor => min_eigenvalue(rho0),
        _ => f64::INFINITY,
    };
    let mut projections = 0;
    observe(0, 0.0, rho0);
    for k in 0..steps {
        let t = k as f64 * dt;
        state = nonlinear_sme_increment(&params.frame(t), &state, dt, &driver.increment_at(k));
        if !check_finite(&state) {
            return Err(abort(k + 1, "non-finite state"));
        }
        match policy {
            PositivityPolicy::Ignore => {}
            PositivityPolicy::Monitor => worst = worst.min(min_eigenvalue(&state)),
            PositivityPolicy::Project => {
                if min_eigenvalue(&state) < 0.0 {
                    state = project_to_density(&state)?;
                    projections += 1;
                }
            }
        }
        if (k + 1) % stride == 0 || k + 1 == steps {
            let t1 = (k + 1) as f64 * dt;
            observe(k + 1, t1, &params.to_lab(&state, t1));
        }
    }
    let t_end = steps as f64 * dt;
    let final_state = params.to_lab(&state, t_end);
    Ok(RunSummary {
        final_trace: trace(&final_state).re,
        final_state,
        worst_eigenvalue: (policy == PositivityPolicy::Monitor).then_some(worst),
        projections,
    })
}

/// A sampled path of either equation, stored in the Schrödinger picture.
///
/// `trace[k]` is `tr γ(t_k)`; for a normalized run started without a
/// linear counterpart it is the reconstructed trace with `T(0) = 1`.
/// Increment row `k` drives the step from `t_k` to `t_{k+1}`.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub kind: TrajectoryKind,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Operator>,
    pub trace: Vec<f64>,
    pub output_increments: Vec<Vec<f64>>,
    pub innovation_increments: Vec<Vec<f64>>,
    pub couplings: Vec<Operator>,
}

impl TrajectoryRecord {
    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.nrows())
    }

    /// Increments of the process that drives this record's equation.
    pub fn driving_increments(&self) -> &[Vec<f64>] {
        match self.kind {
            TrajectoryKind::Linear => &self.output_increments,
            TrajectoryKind::Normalized => &self.innovation_increments,
        }
    }

    /// `tr(A X_k)` for the stored state `X_k` (γ or ρ).
    pub fn expectation(&self, observable: &Operator, step: usize) -> f64 {
        (observable * &self.states[step]).trace().re
    }

    /// CSV with columns `t`, row-major `re_ij,im_ij` entries, `trace`, then
    /// the driving increments (`dY_j` or `dB_j`); the final row has none.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.dim();
        let n = self.couplings.len();
        let mut header = vec!["t".to_string()];
        for r in 0..d {
            for c in 0..d {
                header.push(format!("re_{r}_{c}"));
                header.push(format!("im_{r}_{c}"));
            }
        }
        header.push("trace".into());
        let label = match self.kind {
            TrajectoryKind::Linear => "dY",
            TrajectoryKind::Normalized => "dB",
        };
        header.extend((1..=n).map(|j| format!("{label}_{j}")));
        writeln!(w, "{}", header.join(","))?;
        let incr = self.driving_increments();
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let mut row = vec![format!("{t}")];
            for r in 0..d {
                for c in 0..d {
                    row.push(format!("{}", s[(r, c)].re));
                    row.push(format!("{}", s[(r, c)].im));
                }
            }
            row.push(format!("{}", self.trace[k]));
            match incr.get(k) {
                Some(x) => row.extend(x.iter().map(|v| format!("{v}"))),
                None => row.extend(std::iter::repeat_n(String::new(), n)),
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Expectations of named observables every `stride` steps.
    pub fn summary(&self, observables: &[(String, Operator)], stride: usize) -> Value {
        let stride = stride.max(1);
        let checkpoints: Vec<Value> = (0..self.times.len())
            .filter(|k| k % stride == 0 || *k == self.steps())
            .map(|k| {
                let values: serde_json::Map<String, Value> = observables
                    .iter()
                    .map(|(name, a)| (name.clone(), json!(self.expectation(a, k))))
                    .collect();
                json!({ "t": self.times[k], "trace": self.trace[k], "expectations": values })
            })
            .collect();
        json!({ "kind": self.kind, "dt": self.dt, "steps": self.steps(), "checkpoints": checkpoints })
    }
}

fn times(steps: usize, dt: f64) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 * dt).collect()
}

fn rows<D: Driver + ?Sized>(driver: &D) -> Vec<Vec<f64>> {
    (0..driver.steps()).map(|k| driver.increment_at(k).into_owned()).collect()
}

fn shift(incr: &[f64], m: &[f64], dt: f64, sign: f64) -> Vec<f64> {
    incr.iter().zip(m).map(|(x, c)| x + sign * c * dt).collect()
}

/// Linear path driven by output increments, with innovations attached.
pub fn record_linear_sme<D: Driver + ?Sized>(
    params: &SystemParams,
    gamma0: &Operator,
    driver: &D,
) -> Result<TrajectoryRecord> {
    let mut states = Vec::with_capacity(driver.steps() + 1);
    run_linear_sme(params, gamma0, driver, 1, |_, _, g| states.push(g.clone()))?;
    let dy = rows(driver);
    let trace: Vec<f64> = states.iter().map(|g| trace(g).re).collect();
    let mut db = Vec::with_capacity(dy.len());
    for (k, y) in dy.iter().enumerate() {
        if !(trace[k] > 0.0) {
            return Err(abort(k, format!("nonpositive trace {}", trace[k])));
        }
        let rho = &states[k] / C64::from(trace[k]);
        db.push(shift(y, &measurement_compensator(&rho, params.couplings()), params.dt(), -1.0));
    }
    Ok(TrajectoryRecord {
        kind: TrajectoryKind::Linear,
        dt: params.dt(),
        times: times(driver.steps(), params.dt()),
        states,
        trace,
        output_increments: dy,
        innovation_increments: db,
        couplings: params.couplings().to_vec(),
    })
}

/// Normalized path driven by innovation increments. The output increments
/// and the trace are filled in with the matched discretization
/// `dY = dB + m dt`, `T_{k+1} = T_k (1 + Σ m dY)`, `T_0 = 1`.
pub fn record_nonlinear_sme<D: Driver + ?Sized>(
    params: &SystemParams,
    rho0: &Operator,
    driver: &D,
    policy: PositivityPolicy,
) -> Result<TrajectoryRecord> {
    let mut states = Vec::with_capacity(driver.steps() + 1);
    run_nonlinear_sme(params, rho0, driver, policy, 1, |_, _, r| states.push(r.clone()))?;
    let db = rows(driver);
    let mut trace = vec![1.0];
    let mut dy = Vec::with_capacity(db.len());
    for (k, b) in db.iter().enumerate() {
        let m = measurement_compensator(&states[k], params.couplings());
        let y = shift(b, &m, params.dt(), 1.0);
        let s: f64 = m.iter().zip(&y).map(|(a, b)| a * b).sum();
        trace.push(trace[k] * (1.0 + s));
        dy.push(y);
    }
    Ok(TrajectoryRecord {
        kind: TrajectoryKind::Normalized,
        dt: params.dt(),
        times: times(driver.steps(), params.dt()),
        states,
        trace,
        output_increments: dy,
        innovation_increments: db,
        couplings: params.couplings().to_vec(),
    })
}

/// `ρ_k = γ_k / tr γ_k` with innovations `dB_k = dY_k − m(ρ_k) dt`.
pub fn normalize_path(rec: &TrajectoryRecord) -> Result<TrajectoryRecord> {
    if rec.kind != TrajectoryKind::Linear {
        return Err(Error::InvalidParameter("normalize_path expects a linear record".into()));
    }
    let mut states = Vec::with_capacity(rec.states.len());
    let mut trace = Vec::with_capacity(rec.states.len());
    for (k, g) in rec.states.iter().enumerate() {
        let tr = crate::linalg::trace(g).re;
        if !(tr > 0.0) {
            return Err(abort(k, format!("nonpositive trace {tr}")));
        }
        states.push(g / C64::from(tr));
        trace.push(tr);
    }
    let db = rec
        .output_increments
        .iter()
        .enumerate()
        .map(|(k, y)| shift(y, &measurement_compensator(&states[k], &rec.couplings), rec.dt, -1.0))
        .collect();
    Ok(TrajectoryRecord {
        kind: TrajectoryKind::Normalized,
        dt: rec.dt,
        times: rec.times.clone(),
        states,
        trace,
        output_increments: rec.output_increments.clone(),
        innovation_increments: db,
        couplings: rec.couplings.clone(),
    })
}

/// Inverse of [`normalize_path`]: `dY = dB + m dt`, the trace from its
/// left-point recursion started at `t0`, and `γ_k = T_k ρ_k`.
pub fn reconstruct_path(rec: &TrajectoryRecord, t0: f64) -> Result<TrajectoryRecord> {
    if rec.kind != TrajectoryKind::Normalized {
        return Err(Error::InvalidParameter("reconstruct_path expects a normalized record".into()));
    }
    if !(t0 > 0.0) {
        return Err(Error::InvalidParameter(format!("initial trace must be positive, got {t0}")));
    }
    for r in &rec.states {
        check_unit_trace(r)?;
    }
    let mut trace = vec![t0];
    let mut dy = Vec::with_capacity(rec.innovation_increments.len());
    for (k, b) in rec.innovation_increments.iter().enumerate() {
        let m = measurement_compensator(&rec.states[k], &rec.couplings);
        let y = shift(b, &m, rec.dt, 1.0);
        let s: f64 = m.iter().zip(&y).map(|(a, b)| a * b).sum();
        let next = trace[k] * (1.0 + s);
        if !(next > 0.0) {
            return Err(abort(k + 1, format!("trace process reached {next}")));
        }
        trace.push(next);
        dy.push(y);
    }
    let states = rec
        .states
        .iter()
        .zip(&trace)
        .map(|(r, t)| r * C64::from(*t))
        .collect();
    Ok(TrajectoryRecord {
        kind: TrajectoryKind::Linear,
        dt: rec.dt,
        times: rec.times.clone(),
        states,
        trace,
        output_increments: dy,
        innovation_increments: rec.innovation_increments.clone(),
        couplings: rec.couplings.clone(),
    })
}

/// Checkpointed Monte Carlo mean of a matrix-valued path.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPath {
    pub times: Vec<f64>,
    pub mean: Vec<Operator>,
    /// Hilbert–Schmidt standard error of each mean.
    pub stderr: Vec<f64>,
    /// Entrywise standard errors, `se(Re) + i·se(Im)`.
    pub entry_stderr: Vec<Operator>,
}

impl MeanPath {
    pub fn last(&self) -> &Operator {
        self.mean.last().expect("mean path is never empty")
    }
}

/// Checkpoint indices `0, stride, 2·stride, …, steps`.
pub fn checkpoint_steps(steps: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut v: Vec<usize> = (0..=steps).step_by(stride).collect();
    if *v.last().unwrap() != steps {
        v.push(steps);
    }
    v
}

/// Averages per-trajectory checkpoint sequences in index order.
pub(crate) fn mean_over_trajectories<F>(
    count: usize,
    dim: usize,
    checkpoint_times: Vec<f64>,
    path: F,
) -> Result<MeanPath>
where
    F: Fn(usize) -> Result<Vec<Operator>> + Sync,
{
    let mut moments = vec![OperatorMoments::new(dim); checkpoint_times.len()];
    ordered_fold(count, path, |_, states| {
        for (m, s) in moments.iter_mut().zip(&states) {
            m.add(s);
        }
    })?;
    Ok(MeanPath {
        times: checkpoint_times,
        mean: moments.iter().map(OperatorMoments::mean).collect(),
        stderr: moments.iter().map(OperatorMoments::hs_stderr).collect(),
        entry_stderr: moments.iter().map(OperatorMoments::entry_stderr).collect(),
    })
}

/// Mean of the normalized equation over `trajectories` Brownian innovation
/// paths (trajectory `i` uses sub-seed `i` of `seed`).
pub fn monte_carlo_mean_path(
    params: &SystemParams,
    rho0: &Operator,
    steps: usize,
    trajectories: usize,
    seed: u64,
    stride: usize,
) -> Result<MeanPath> {
    check_density(rho0, DEFAULT_POS_TOL)?;
    if trajectories == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let marks = checkpoint_steps(steps, stride);
    let times = marks.iter().map(|k| *k as f64 * params.dt()).collect();
    mean_over_trajectories(trajectories, params.dim(), times, |i| {
        let w = WienerPath::for_trajectory(params.channels(), steps, params.dt(), seed, i as u64)?;
        let mut out = Vec::with_capacity(marks.len());
        let mut next = 0;
        run_nonlinear_sme(params, rho0, &w, PositivityPolicy::Ignore, 1, |k, _, s| {
            if marks.get(next) == Some(&k) {
                out.push(s.clone());
                next += 1;
            }
        })?;
        Ok(out)
    })
}
