use serde::Serialize;

use super::stats::{loglog_fit, summarize, LinearFit};
use crate::error::{Error, Result};
use crate::linalg::{check_density, hs_norm, Operator, DEFAULT_POS_TOL};
use crate::master::{lindblad_rk4, run_linear_sme, run_nonlinear_sme, PositivityPolicy};
use crate::montecarlo::ordered_map;
use crate::noise::WienerPath;
use crate::system::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepperKind {
    /// RK4 for the noise-averaged Lindblad equation.
    Deterministic,
    LinearSme,
    NonlinearSme,
}

#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    /// System parameters; the step size is replaced per level.
    pub params: SystemParams,
    pub rho0: Operator,
    pub horizon: f64,
    pub trajectories: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub stepper: StepperKind,
    /// Step sizes, coarse to fine; the last is the reference.
    pub dts: Vec<f64>,
    /// Mean `‖X_dt(T) − X_ref(T)‖_HS` for every level but the reference.
    pub errors: Vec<f64>,
    pub stderr: Vec<f64>,
    pub fit: LinearFit,
    pub order: f64,
}

fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    let n = horizon / dt;
    if (n - n.round()).abs() > 1e-9 * n.max(1.0) || n.round() < 1.0 {
        return Err(Error::InvalidParameter(format!("horizon {horizon} is not a multiple of dt {dt}")));
    }
    Ok(n.round() as usize)
}

/// Strong order of one stepper from the log-log slope of the error against
/// the finest level. Brownian paths are sampled at the finest step and
/// summed for the coarser levels, so every level sees the same noise.
pub fn convergence_order(stepper: StepperKind, dts: &[f64], cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if dts.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: dts.len() });
    }
    let mut dts = dts.to_vec();
    dts.sort_by(|a, b| b.total_cmp(a));
    let fine = *dts.last().unwrap();
    let fine_steps = steps_for(cfg.horizon, fine)?;
    let factors: Vec<usize> = dts
        .iter()
        .map(|dt| {
            let f = dt / fine;
            if (f - f.round()).abs() > 1e-9 * f {
                Err(Error::InvalidParameter(format!("dt {dt} is not a multiple of {fine}")))
            } else {
                Ok(f.round() as usize)
            }
        })
        .collect::<Result<_>>()?;
    check_density(&cfg.rho0, DEFAULT_POS_TOL)?;
    let levels: Vec<SystemParams> = dts.iter().map(|dt| cfg.params.with_dt(*dt)).collect::<Result<_>>()?;

    let per_path: Vec<Vec<f64>> = match stepper {
        StepperKind::Deterministic => {
            let finals: Vec<Operator> = levels
                .iter()
                .zip(&factors)
                .map(|(p, f)| lindblad_rk4(&cfg.rho0, p, cfg.horizon, fine_steps / f))
                .collect();
            let reference = finals.last().unwrap();
            vec![finals[..finals.len() - 1].iter().map(|x| hs_norm(&(x - reference))).collect()]
        }
        StepperKind::LinearSme | StepperKind::NonlinearSme => ordered_map(cfg.trajectories, |i| {
            let w = WienerPath::for_trajectory(cfg.params.channels(), fine_steps, fine, cfg.seed, i as u64)?;
            let finals = levels
                .iter()
                .zip(&factors)
                .map(|(p, f)| {
                    let path = if *f == 1 { w.clone() } else { w.coarsen(*f)? };
                    let run = match stepper {
                        StepperKind::LinearSme => run_linear_sme(p, &cfg.rho0, &path, usize::MAX, |_, _, _| {})?,
                        _ => run_nonlinear_sme(p, &cfg.rho0, &path, PositivityPolicy::Ignore, usize::MAX, |_, _, _| {})?,
                    };
                    Ok(run.final_state)
                })
                .collect::<Result<Vec<_>>>()?;
            let reference = finals.last().unwrap();
            Ok(finals[..finals.len() - 1].iter().map(|x| hs_norm(&(x - reference))).collect())
        })?,
    };
    let mut errors = Vec::new();
    let mut stderr = Vec::new();
    for k in 0..dts.len() - 1 {
        let s = summarize(&per_path.iter().map(|p| p[k]).collect::<Vec<_>>());
        errors.push(s.mean);
        stderr.push(s.stderr);
    }
    let fit = loglog_fit(&dts[..dts.len() - 1], &errors)?;
    Ok(ConvergenceReport { stepper, order: fit.slope, dts, errors, stderr, fit })
}
