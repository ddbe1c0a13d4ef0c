//! Runs a validated scenario and renders its artifacts.

use std::fmt::Write as _;

use qsme_core::ensemble::run_ensemble;
use qsme_core::linalg::{hermitian_spectrum, outer, trace_re, Ket, Operator, C64};
use qsme_core::master::{run_linear_sme, run_nonlinear_sme};
use qsme_core::meanfield::{
    frozen_field_step, mckean_vlasov_solve, weighted_mean, MeanFieldConfig, MeanFieldMode, PicardReport,
};
use qsme_core::montecarlo::{ordered_map, KahanSum, OperatorMoments};
use qsme_core::pure::{linear_pure_step, nonlinear_pure_step};
use qsme_core::validation::stats::summarize;
use qsme_core::{Driver, Error, SystemParams, WienerPath};
use serde_json::{json, Value};

use crate::scenario::{Engine, Scenario};

/// Per-trajectory observations: `values[o][c]` is output `o` at its
/// checkpoint `c`; `weights` likewise (all ones for unweighted engines).
struct Trajectory {
    values: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    final_state: Operator,
    final_weight: f64,
    worst_eigenvalue: Option<f64>,
    projections: usize,
}

pub struct SimulationResult {
    pub summary: Value,
    /// Long-format rows `(t, traj_id, observable, value)` in output order.
    pub rows: Vec<(f64, String, String, f64)>,
    /// Set when the engine finished but did not meet its own criterion.
    pub abort: Option<String>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

struct Recorder<'a> {
    scenario: &'a Scenario,
    steps: usize,
    values: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
}

impl<'a> Recorder<'a> {
    fn new(scenario: &'a Scenario, steps: usize) -> Self {
        let n = scenario.outputs.len();
        Self { scenario, steps, values: vec![Vec::new(); n], weights: vec![Vec::new(); n] }
    }

    /// `state` is normalized; `weight` is the likelihood factor it carries.
    fn record(&mut self, k: usize, state: &Operator, weight: f64) {
        for (o, out) in self.scenario.outputs.iter().enumerate() {
            if k % out.stride == 0 || k == self.steps {
                self.values[o].push((&out.observable * state).trace().re);
                self.weights[o].push(weight);
            }
        }
    }

    fn finish(self, final_state: Operator, final_weight: f64) -> Trajectory {
        Trajectory {
            values: self.values,
            weights: self.weights,
            final_state,
            final_weight,
            worst_eigenvalue: None,
            projections: 0,
        }
    }
}

fn checkpoint_times(steps: usize, stride: usize, dt: f64) -> Vec<f64> {
    qsme_core::master::checkpoint_steps(steps, stride).into_iter().map(|k| k as f64 * dt).collect()
}

fn leading_ket(rho: &Operator) -> qsme_core::Result<Ket> {
    let spec = hermitian_spectrum(rho)?;
    Ok(spec.vectors.last().cloned().expect("dimension is positive"))
}

fn pure_trajectory(s: &Scenario, p: &SystemParams, w: &WienerPath, linear: bool) -> qsme_core::Result<Trajectory> {
    let steps = w.steps();
    let dt = p.dt();
    let mut rec = Recorder::new(s, steps);
    let chi0 = leading_ket(&s.rho0)?;
    let mut chi = p.ket_from_lab(&chi0, 0.0);
    rec.record(0, &outer(&chi0), 1.0);
    let mut lab = chi0;
    for k in 0..steps {
        let t = k as f64 * dt;
        let incr = w.increment_at(k);
        chi = if linear {
            linear_pure_step(&chi, p, t, &incr)?
        } else {
            nonlinear_pure_step(&chi, p, t, &incr)?.state
        };
        let n2 = chi.norm_squared();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::TrajectoryAbort { step: k + 1, reason: format!("state norm² reached {n2}") });
        }
        lab = p.ket_to_lab(&chi, (k + 1) as f64 * dt);
        rec.record(k + 1, &(outer(&lab) / C64::from(n2)), n2);
    }
    let n2 = lab.norm_squared();
    Ok(rec.finish(outer(&lab) / C64::from(n2), if linear { n2 } else { 1.0 }))
}

fn sme_trajectory(s: &Scenario, p: &SystemParams, w: &WienerPath, linear: bool, obs_stride: usize) -> qsme_core::Result<Trajectory> {
    let steps = w.steps();
    let mut rec = Recorder::new(s, steps);
    if linear {
        let run = run_linear_sme(p, &s.rho0, w, obs_stride, |k, _, g| {
            let tr = trace_re(g);
            rec.record(k, &(g / C64::from(tr)), tr);
        })?;
        let tr = run.final_trace;
        Ok(rec.finish(run.final_state / C64::from(tr), tr))
    } else {
        let run = run_nonlinear_sme(p, &s.rho0, w, s.positivity, obs_stride, |k, _, r| rec.record(k, r, 1.0))?;
        let mut t = rec.finish(run.final_state, 1.0);
        t.worst_eigenvalue = run.worst_eigenvalue;
        t.projections = run.projections;
        Ok(t)
    }
}

fn ensemble_trajectory(s: &Scenario, p: &SystemParams, w: &WienerPath, obs_stride: usize) -> qsme_core::Result<Trajectory> {
    let steps = w.steps();
    let mut rec = Recorder::new(s, steps);
    let mut last = s.rho0.clone();
    run_ensemble(p, &s.rho0, w, s.rank_tol, obs_stride, |k, _, r| {
        rec.record(k, r, 1.0);
        if k == steps {
            last = r.clone();
        }
    })?;
    Ok(rec.finish(last, 1.0))
}

/// Replays trajectory paths under the converged mean field.
fn frozen_trajectory(s: &Scenario, cfg: &MeanFieldConfig, eta: &[Operator], w: &WienerPath, obs_stride: usize) -> qsme_core::Result<Trajectory> {
    let p = &cfg.base;
    let steps = w.steps();
    let dt = p.dt();
    let mut rec = Recorder::new(s, steps);
    let mut state = p.from_lab(&s.rho0, 0.0);
    rec.record(0, &s.rho0, 1.0);
    let mut lab = s.rho0.clone();
    for k in 0..steps {
        state = frozen_field_step(&state, &eta[k], cfg, k as f64 * dt, &w.increment_at(k))?;
        if (k + 1) % obs_stride == 0 || k + 1 == steps {
            let t1 = (k + 1) as f64 * dt;
            lab = p.to_lab(&state, t1);
            if cfg.mode == MeanFieldMode::Linear {
                lab /= C64::from(trace_re(&lab));
            }
            rec.record(k + 1, &lab, 1.0);
        }
    }
    Ok(rec.finish(lab, 1.0))
}

fn matrix_json(m: &Operator) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

pub fn run(s: &Scenario) -> Result<SimulationResult, Error> {
    let params = SystemParams::new(s.hamiltonian.clone(), s.couplings.clone(), s.dt, s.picture)?;
    let steps = s.steps();
    let obs_stride = s.outputs.iter().map(|o| o.stride).fold(0, gcd).max(1);
    let weighted = matches!(s.engine, Engine::PureLinear | Engine::SmeLinear);

    let mut meanfield: Option<(MeanFieldConfig, PicardReport)> = None;
    if let (Engine::MeanField, Some(block)) = (s.engine, &s.meanfield) {
        let cfg = MeanFieldConfig {
            base: params.clone(),
            interaction: block.interaction.clone(),
            rho0: s.rho0.clone(),
            trajectories: s.trajectories,
            horizon: s.horizon,
            picard_max_iter: block.picard_max_iter,
            picard_tol: block.picard_tol,
            mode: block.mode,
            seed: s.seed,
            conjugate: block.conjugate,
        };
        let report = mckean_vlasov_solve(&cfg)?;
        meanfield = Some((cfg, report));
    }

    let trajectories = ordered_map(s.trajectories, |i| {
        let w = WienerPath::for_trajectory(params.channels(), steps, s.dt, s.seed, i as u64)?;
        match s.engine {
            Engine::PureLinear => pure_trajectory(s, &params, &w, true),
            Engine::PureNonlinear => pure_trajectory(s, &params, &w, false),
            Engine::SmeLinear => sme_trajectory(s, &params, &w, true, obs_stride),
            Engine::SmeNonlinear => sme_trajectory(s, &params, &w, false, obs_stride),
            Engine::Ensemble => ensemble_trajectory(s, &params, &w, obs_stride),
            Engine::MeanField => {
                let (cfg, report) = meanfield.as_ref().expect("mean-field block validated");
                frozen_trajectory(s, cfg, &report.mean_field_path, &w, obs_stride)
            }
        }
    })?;

    let mut rows = Vec::new();
    if s.per_trajectory {
        for (i, tr) in trajectories.iter().enumerate() {
            for (o, out) in s.outputs.iter().enumerate() {
                for (t, v) in checkpoint_times(steps, out.stride, s.dt).into_iter().zip(&tr.values[o]) {
                    rows.push((t, i.to_string(), out.name.clone(), *v));
                }
            }
        }
    }
    let mut observables = serde_json::Map::new();
    for (o, out) in s.outputs.iter().enumerate() {
        let times = checkpoint_times(steps, out.stride, s.dt);
        let mut means = Vec::with_capacity(times.len());
        let mut errs = Vec::with_capacity(times.len());
        for c in 0..times.len() {
            let vals: Vec<f64> = trajectories.iter().map(|t| t.values[o][c]).collect();
            let (m, e) = if weighted {
                let ws: Vec<f64> = trajectories.iter().map(|t| t.weights[o][c]).collect();
                let est = weighted_mean(&ws, &vals)?;
                (est.estimate, est.stderr)
            } else {
                let sm = summarize(&vals);
                (sm.mean, sm.stderr)
            };
            means.push(m);
            errs.push(e);
        }
        for (t, (m, e)) in times.iter().zip(means.iter().zip(&errs)) {
            rows.push((*t, "mean".into(), out.name.clone(), *m));
            rows.push((*t, "stderr".into(), out.name.clone(), *e));
        }
        observables.insert(out.name.clone(), json!({ "t": times, "mean": means, "stderr": errs }));
    }

    let mut moments = OperatorMoments::new(s.dim);
    let mut weight_sum = KahanSum::default();
    for t in &trajectories {
        moments.add(&(&t.final_state * C64::from(t.final_weight)));
        weight_sum.add(t.final_weight);
    }
    let final_mean = moments.mean() / C64::from(weight_sum.value() / trajectories.len() as f64);

    let mut diagnostics = serde_json::Map::new();
    let mut abort = None;
    match s.engine {
        Engine::SmeNonlinear => {
            let worst = trajectories.iter().filter_map(|t| t.worst_eigenvalue).fold(f64::INFINITY, f64::min);
            if worst.is_finite() {
                diagnostics.insert("worst_min_eigenvalue".into(), json!(worst));
            }
            diagnostics.insert("projections".into(), json!(trajectories.iter().map(|t| t.projections).sum::<usize>()));
        }
        Engine::PureLinear | Engine::SmeLinear => {
            let ws: Vec<f64> = trajectories.iter().map(|t| t.final_weight).collect();
            let est = weighted_mean(&ws, &vec![0.0; ws.len()])?;
            diagnostics.insert("final_effective_sample_size".into(), json!(est.ess));
            diagnostics.insert("weights_degenerate".into(), json!(est.degenerate));
        }
        Engine::MeanField => {
            let (_, report) = meanfield.as_ref().expect("mean-field ran");
            diagnostics.insert("picard".into(), report.to_json(obs_stride));
            if !report.converged {
                abort = Some(format!(
                    "Picard iteration did not reach tolerance in {} iterations (last distance {:.3e})",
                    report.iteration_distances.len(),
                    report.iteration_distances.last().copied().unwrap_or(f64::NAN)
                ));
            }
        }
        _ => {}
    }

    let summary = json!({
        "scenario": s.name,
        "engine": s.engine.name(),
        "config_hash": s.config_hash(),
        "seed": s.seed,
        "results": {
            "trajectories": s.trajectories,
            "steps": steps,
            "dt": s.dt,
            "observables": observables,
            "final_mean_state": matrix_json(&final_mean),
        },
        "diagnostics": diagnostics,
    });
    Ok(SimulationResult { summary, rows, abort })
}

pub fn render_csv(rows: &[(f64, String, String, f64)]) -> String {
    let mut out = String::from("t,traj_id,observable,value\n");
    for (t, id, name, v) in rows {
        let _ = writeln!(out, "{t},{id},{name},{v}");
    }
    out
}

pub fn rows_json(rows: &[(f64, String, String, f64)]) -> Value {
    Value::Array(
        rows.iter()
            .map(|(t, id, name, v)| json!({ "t": t, "traj_id": id, "observable": name, "value": v }))
            .collect(),
    )
}
