use serde::Serialize;

use super::martingale::pure_norm_samples;
use super::stats::{margin, summarize};
use crate::error::{Error, Result};
use crate::linalg::{coupling_norm, positive_parts, trace_norm, trace_re, Ket, Operator};
use crate::master::{checkpoint_steps, run_linear_sme};
use crate::montecarlo::ordered_map;
use crate::noise::WienerPath;
use crate::system::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `E‖χ(t)‖² ≤ e^{4t‖L‖²}‖χ0‖²` with Brownian innovation.
    PureNormGrowth,
    /// `E tr γ(t)² ≤ tr γ0² e^{4t‖L‖²}` with Brownian output.
    GammaSquaredGrowth,
    /// `E (tr γ(t))² ≤ [(tr γ0⁺)² + (tr γ0⁻)²] e^{4t‖L‖²}`.
    TraceSquaredGrowth,
    /// `E tr|γ(t)| ≤ tr|γ0|`.
    TraceAbsBound,
}

impl BoundKind {
    pub const ALL: [BoundKind; 4] = [
        BoundKind::PureNormGrowth,
        BoundKind::GammaSquaredGrowth,
        BoundKind::TraceSquaredGrowth,
        BoundKind::TraceAbsBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::PureNormGrowth => "pure_norm_growth",
            BoundKind::GammaSquaredGrowth => "gamma_squared_growth",
            BoundKind::TraceSquaredGrowth => "trace_squared_growth",
            BoundKind::TraceAbsBound => "trace_abs_bound",
        }
    }
}

#[derive(Debug, Clone)]
pub enum InitialState {
    Ket(Ket),
    Operator(Operator),
}

#[derive(Debug, Clone)]
pub struct BoundConfig {
    pub params: SystemParams,
    pub initial: InitialState,
    pub steps: usize,
    pub trajectories: usize,
    pub seed: u64,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheckResult {
    pub name: String,
    pub times: Vec<f64>,
    pub observed: Vec<f64>,
    pub stderr: Vec<f64>,
    pub bound: Vec<f64>,
    /// `(bound − observed)/stderr` per checkpoint.
    pub margin: Vec<f64>,
    pub pass: bool,
}

impl BoundCheckResult {
    pub fn min_margin(&self) -> f64 {
        self.margin.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn new(name: &str, times: Vec<f64>, samples: &[Vec<f64>], bound: Vec<f64>) -> Self {
        let mut observed = Vec::with_capacity(times.len());
        let mut stderr = Vec::with_capacity(times.len());
        for k in 0..times.len() {
            let column: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            let s = summarize(&column);
            observed.push(s.mean);
            stderr.push(s.stderr);
        }
        Self::from_estimates(name, times, observed, stderr, bound)
    }

    pub(crate) fn from_estimates(
        name: &str,
        times: Vec<f64>,
        observed: Vec<f64>,
        stderr: Vec<f64>,
        bound: Vec<f64>,
    ) -> Self {
        let margin: Vec<f64> = observed
            .iter()
            .zip(&bound)
            .zip(&stderr)
            .map(|((o, b), s)| margin(*o, *b, *s))
            .collect();
        let pass = margin.iter().all(|m| *m >= -3.0);
        Self { name: name.into(), times, observed, stderr, bound, margin, pass }
    }
}

/// Samples `f(γ(t))` at checkpoints along linear paths with Brownian output.
pub fn linear_functional_samples<F>(
    params: &SystemParams,
    gamma0: &Operator,
    steps: usize,
    trajectories: usize,
    seed: u64,
    stride: usize,
    f: F,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: Fn(&Operator) -> f64 + Sync,
{
    let marks = checkpoint_steps(steps, stride);
    let dt = params.dt();
    let samples = ordered_map(trajectories, |i| {
        let w = WienerPath::for_trajectory(params.channels(), steps, dt, seed, i as u64)?;
        let mut out = Vec::with_capacity(marks.len());
        let mut next = 0;
        run_linear_sme(params, gamma0, &w, 1, |k, _, g| {
            if marks.get(next) == Some(&k) {
                out.push(f(g));
                next += 1;
            }
        })?;
        Ok(out)
    })?;
    Ok((marks.iter().map(|k| *k as f64 * dt).collect(), samples))
}

/// Monte Carlo left side against the analytic right side of one moment bound.
pub fn moment_bound_check(kind: BoundKind, cfg: &BoundConfig) -> Result<BoundCheckResult> {
    let l2 = coupling_norm(cfg.params.couplings()).powi(2);
    let growth = |t: f64| (4.0 * t * l2).exp();
    let p = &cfg.params;
    match (kind, &cfg.initial) {
        (BoundKind::PureNormGrowth, InitialState::Ket(chi0)) => {
            let s = pure_norm_samples(p, chi0, cfg.steps, cfg.trajectories, cfg.seed, cfg.stride, true)?;
            let n0 = chi0.norm_squared();
            let bound = s.times.iter().map(|t| growth(*t) * n0).collect();
            Ok(BoundCheckResult::new(kind.name(), s.times, &s.samples, bound))
        }
        (BoundKind::PureNormGrowth, _) => Err(Error::InvalidParameter("pure norm bound needs a ket".into())),
        (_, InitialState::Ket(_)) => Err(Error::InvalidParameter("operator bound needs an operator".into())),
        (_, InitialState::Operator(g0)) => {
            let (f, b0): (fn(&Operator) -> f64, f64) = match kind {
                BoundKind::GammaSquaredGrowth => (|g| (g * g).trace().re, (g0 * g0).trace().re),
                BoundKind::TraceSquaredGrowth => {
                    let (plus, minus) = positive_parts(g0)?;
                    (|g| trace_re(g).powi(2), trace_re(&plus).powi(2) + trace_re(&minus).powi(2))
                }
                BoundKind::TraceAbsBound => (trace_norm, trace_norm(g0)),
                BoundKind::PureNormGrowth => unreachable!(),
            };
            let (times, samples) =
                linear_functional_samples(p, g0, cfg.steps, cfg.trajectories, cfg.seed, cfg.stride, f)?;
            let bound = times
                .iter()
                .map(|t| if kind == BoundKind::TraceAbsBound { b0 } else { b0 * growth(*t) })
                .collect();
            Ok(BoundCheckResult::new(kind.name(), times, &samples, bound))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, diagonal, pauli_x, pauli_z, zeros};
    use crate::system::Picture;

    #[test]
    fn free_case_is_equality() {
        let p = SystemParams::new(zeros(2), vec![zeros(2)], 0.01, Picture::Schroedinger).unwrap();
        let g0 = diagonal(&[0.6, 0.4]);
        let cfg = BoundConfig {
            params: p,
            initial: InitialState::Operator(g0.clone()),
            steps: 20,
            trajectories: 40,
            seed: 1,
            stride: 5,
        };
        let r = moment_bound_check(BoundKind::GammaSquaredGrowth, &cfg).unwrap();
        assert!(r.pass);
        for (o, b) in r.observed.iter().zip(&r.bound) {
            assert!((o - b).abs() < 1e-14);
        }
    }

    #[test]
    fn mixed_sign_trace_norm_bound() {
        let p = SystemParams::new(pauli_x() * c(0.3, 0.0), vec![pauli_z()], 0.01, Picture::Schroedinger).unwrap();
        let cfg = BoundConfig {
            params: p,
            initial: InitialState::Operator(pauli_z() * c(0.5, 0.0)),
            steps: 50,
            trajectories: 200,
            seed: 2,
            stride: 10,
        };
        assert!(moment_bound_check(BoundKind::TraceAbsBound, &cfg).unwrap().pass);
        assert!(moment_bound_check(BoundKind::PureNormGrowth, &cfg).is_err());
    }
}
