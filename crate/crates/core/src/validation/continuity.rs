use serde::Serialize;

use super::bounds::{linear_functional_samples, BoundCheckResult};
use super::stats::{linear_fit, summarize, LinearFit};
use crate::error::{ensure_dim, Result};
use crate::linalg::{coupling_norm, ensure_hermitian, hs_norm, operator_norm, trace_norm, trace_re, Operator, C64};
use crate::master::{checkpoint_steps, run_linear_sme, run_nonlinear_sme, PositivityPolicy};
use crate::montecarlo::ordered_map;
use crate::noise::WienerPath;
use crate::system::SystemParams;

#[derive(Debug, Clone)]
pub struct ContinuityConfig {
    /// System with the reference Hamiltonian `H1`.
    pub params: SystemParams,
    /// Perturbed Hamiltonian `H2`.
    pub h2: Operator,
    pub gamma0: Operator,
    pub steps: usize,
    pub trajectories: usize,
    pub seed: u64,
    pub stride: usize,
    /// Fractions of `H2 − H1` used for the normalized-equation scaling fit.
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearScaling {
    /// `s·‖H2 − H1‖` per scale.
    pub magnitudes: Vec<f64>,
    /// `E‖ρ1(t) − ρ2(t)‖_HS` at the horizon.
    pub observed: Vec<f64>,
    pub stderr: Vec<f64>,
    pub fit: LinearFit,
    /// Consecutive halvings of the perturbation halve the deviation within
    /// three combined standard errors.
    pub halving_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub delta_norm: f64,
    pub trace_norm_bound: BoundCheckResult,
    pub hs_bound: BoundCheckResult,
    pub nonlinear: NonlinearScaling,
    pub pass: bool,
}

pub const MIN_R_SQUARED: f64 = 0.95;

/// Coupled simulations of the linear and normalized equations under `H1`
/// and `H2` sharing every noise path.
pub fn hamiltonian_continuity_experiment(cfg: &ContinuityConfig) -> Result<ContinuityReport> {
    let p1 = &cfg.params;
    ensure_hermitian(&cfg.h2)?;
    ensure_dim(p1.dim(), cfg.h2.nrows())?;
    let h1 = p1.hamiltonian().clone();
    let delta = &cfg.h2 - &h1;
    let dn = operator_norm(&delta);
    let p2 = p1.with_hamiltonian(cfg.h2.clone())?;
    let dt = p1.dt();
    let marks = checkpoint_steps(cfg.steps, cfg.stride);
    let times: Vec<f64> = marks.iter().map(|k| *k as f64 * dt).collect();

    // Linear equation: per path, tr|γ1 − γ2| and tr(γ1 − γ2)² at checkpoints.
    let pairs = ordered_map(cfg.trajectories, |i| {
        let w = WienerPath::for_trajectory(p1.channels(), cfg.steps, dt, cfg.seed, i as u64)?;
        let mut g1 = Vec::with_capacity(marks.len());
        let mut g2 = Vec::with_capacity(marks.len());
        let collect = |out: &mut Vec<Operator>, params: &SystemParams| {
            let mut next = 0;
            run_linear_sme(params, &cfg.gamma0, &w, 1, |k, _, g| {
                if marks.get(next) == Some(&k) {
                    out.push(g.clone());
                    next += 1;
                }
            })
        };
        collect(&mut g1, p1)?;
        collect(&mut g2, &p2)?;
        Ok(g1
            .iter()
            .zip(&g2)
            .map(|(a, b)| {
                let d = a - b;
                (trace_norm(&d), (&d * &d).trace().re)
            })
            .collect::<Vec<_>>())
    })?;
    let l2 = coupling_norm(p1.couplings()).powi(2);
    let tr0 = trace_re(&cfg.gamma0);
    let hs0 = (&cfg.gamma0 * &cfg.gamma0).trace().re.sqrt();
    let mut tn_obs = Vec::new();
    let mut tn_se = Vec::new();
    let mut hs_obs = Vec::new();
    let mut hs_se = Vec::new();
    for k in 0..marks.len() {
        let a = summarize(&pairs.iter().map(|p| p[k].0).collect::<Vec<_>>());
        let b = summarize(&pairs.iter().map(|p| p[k].1).collect::<Vec<_>>());
        tn_obs.push(a.mean);
        tn_se.push(a.stderr);
        let root = b.mean.max(0.0).sqrt();
        hs_obs.push(root);
        hs_se.push(if root > 0.0 { b.stderr / (2.0 * root) } else { 0.0 });
    }
    let trace_norm_bound = BoundCheckResult::from_estimates(
        "hamiltonian_continuity_trace_norm",
        times.clone(),
        tn_obs,
        tn_se,
        times.iter().map(|t| 2.0 * t * dn * tr0).collect(),
    );
    let hs_bound = BoundCheckResult::from_estimates(
        "hamiltonian_continuity_hs",
        times.clone(),
        hs_obs,
        hs_se,
        times.iter().map(|t| 2.0 * t * dn * hs0 * (2.0 * t * l2).exp()).collect(),
    );

    // Normalized equation: deviation at the horizon for each scale.
    let rho0 = &cfg.gamma0 / C64::from(tr0);
    let perturbed: Vec<SystemParams> = cfg
        .scales
        .iter()
        .map(|s| p1.with_hamiltonian(&h1 + &delta * C64::from(*s)))
        .collect::<Result<_>>()?;
    let devs = ordered_map(cfg.trajectories, |i| {
        let w = WienerPath::for_trajectory(p1.channels(), cfg.steps, dt, cfg.seed, i as u64)?;
        let base = run_nonlinear_sme(p1, &rho0, &w, PositivityPolicy::Ignore, cfg.steps.max(1), |_, _, _| {})?;
        perturbed
            .iter()
            .map(|p| {
                let r = run_nonlinear_sme(p, &rho0, &w, PositivityPolicy::Ignore, cfg.steps.max(1), |_, _, _| {})?;
                Ok(hs_norm(&(&base.final_state - &r.final_state)))
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let mut observed = Vec::new();
    let mut stderr = Vec::new();
    for j in 0..cfg.scales.len() {
        let s = summarize(&devs.iter().map(|d| d[j]).collect::<Vec<_>>());
        observed.push(s.mean);
        stderr.push(s.stderr);
    }
    let magnitudes: Vec<f64> = cfg.scales.iter().map(|s| s * dn).collect();
    let fit = if dn > 0.0 {
        linear_fit(&magnitudes, &observed)?
    } else {
        LinearFit { slope: 0.0, intercept: 0.0, r_squared: 1.0 }
    };
    let mut halving_pass = true;
    for j in 0..cfg.scales.len().saturating_sub(1) {
        let ratio = cfg.scales[j + 1] / cfg.scales[j];
        let predicted = observed[j] * ratio;
        let tol = 3.0 * (stderr[j + 1].powi(2) + (stderr[j] * ratio).powi(2)).sqrt();
        halving_pass &= (observed[j + 1] - predicted).abs() <= tol;
    }
    let nonlinear = NonlinearScaling { magnitudes, observed, stderr, fit, halving_pass };
    let pass = trace_norm_bound.pass && hs_bound.pass && fit.r_squared >= MIN_R_SQUARED && halving_pass;
    Ok(ContinuityReport { delta_norm: dn, trace_norm_bound, hs_bound, nonlinear, pass })
}

/// Mean-square time increments `E‖γ(t) − γ(0)‖²_HS` along linear paths,
/// for the qualitative continuity-in-time check.
pub fn mean_square_increments(
    params: &SystemParams,
    gamma0: &Operator,
    steps: usize,
    trajectories: usize,
    seed: u64,
    stride: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let g0 = gamma0.clone();
    let (times, samples) = linear_functional_samples(params, gamma0, steps, trajectories, seed, stride, move |g| {
        hs_norm(&(g - &g0)).powi(2)
    })?;
    let means = (0..times.len())
        .map(|k| summarize(&samples.iter().map(|s| s[k]).collect::<Vec<_>>()).mean)
        .collect();
    Ok((times, means))
}
