//! Step-halving experiments: two discretizations of the same law driven by
//! shared noise must approach each other as `dt` shrinks.

use serde::Serialize;

use super::stats::summarize;
use crate::ensemble::run_ensemble;
use crate::error::{Error, Result};
use crate::linalg::{hs_norm, outer, Ket, Operator};
use crate::master::{
    linear_sme_increment, nonlinear_sme_increment, normalize_path, reconstruct_path, record_linear_sme,
    record_nonlinear_sme, run_nonlinear_sme, PositivityPolicy,
};
use crate::montecarlo::ordered_map;
use crate::noise::WienerPath;
use crate::pure::nonlinear_pure_increment;
use crate::system::SystemParams;

pub const MAX_HALVING_RATIO: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalvingReport {
    pub label: String,
    /// Coarse to fine, each half the previous.
    pub dts: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `values[j+1] / values[j]`.
    pub ratios: Vec<f64>,
    pub pass: bool,
}

impl HalvingReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct HalvingConfig {
    pub params: SystemParams,
    pub horizon: f64,
    /// Coarsest step; the other levels halve it.
    pub dt0: f64,
    pub levels: usize,
    pub trajectories: usize,
    pub seed: u64,
}

impl HalvingConfig {
    fn dts(&self) -> Vec<f64> {
        (0..self.levels).map(|j| self.dt0 / f64::from(1u32 << j)).collect()
    }
}

/// Runs `metric(params_at_level, path)` on coupled paths for every level and
/// averages over trajectories.
fn halving<F>(label: &str, cfg: &HalvingConfig, metric: F) -> Result<HalvingReport>
where
    F: Fn(&SystemParams, &WienerPath) -> Result<f64> + Sync,
{
    if cfg.levels < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: cfg.levels });
    }
    let dts = cfg.dts();
    let fine = *dts.last().unwrap();
    let fine_steps = (cfg.horizon / fine).round() as usize;
    let levels: Vec<SystemParams> = dts.iter().map(|dt| cfg.params.with_dt(*dt)).collect::<Result<_>>()?;
    let per_path = ordered_map(cfg.trajectories, |i| {
        let w = WienerPath::for_trajectory(cfg.params.channels(), fine_steps, fine, cfg.seed, i as u64)?;
        levels
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let factor = 1usize << (cfg.levels - 1 - j);
                let path = if factor == 1 { w.clone() } else { w.coarsen(factor)? };
                metric(p, &path)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let mut values = Vec::new();
    let mut stderr = Vec::new();
    for j in 0..dts.len() {
        let s = summarize(&per_path.iter().map(|p| p[j]).collect::<Vec<_>>());
        values.push(s.mean);
        stderr.push(s.stderr);
    }
    let ratios: Vec<f64> = values.windows(2).map(|v| v[1] / v[0]).collect();
    let pass = ratios.iter().all(|r| *r <= MAX_HALVING_RATIO);
    Ok(HalvingReport { label: label.into(), dts, values, stderr, ratios, pass })
}

fn max_distance(a: &[Operator], b: &[Operator]) -> f64 {
    a.iter().zip(b).map(|(x, y)| hs_norm(&(x - y))).fold(0.0, f64::max)
}

/// `max_t ‖ρ_ensemble(t) − ρ_direct(t)‖_HS` for a shared innovation path.
pub fn ensemble_equivalence(cfg: &HalvingConfig, rho0: &Operator, rank_tol: f64) -> Result<HalvingReport> {
    halving("ensemble_vs_direct", cfg, |p, w| {
        let mut ens = Vec::new();
        run_ensemble(p, rho0, w, rank_tol, 1, |_, _, r| ens.push(r.clone()))?;
        let mut direct = Vec::new();
        run_nonlinear_sme(p, rho0, w, PositivityPolicy::Ignore, 1, |_, _, r| direct.push(r.clone()))?;
        Ok(max_distance(&ens, &direct))
    })
}

/// `max_t ‖ρ(t) − φ(t)φ(t)†‖_HS` for a rank-one start and shared innovation.
pub fn pure_mixed_consistency(cfg: &HalvingConfig, phi0: &Ket) -> Result<HalvingReport> {
    let phi0 = phi0.unscale(phi0.norm());
    let rho0 = outer(&phi0);
    halving("pure_vs_mixed", cfg, |p, w| {
        let dt = p.dt();
        let mut phi = p.ket_from_lab(&phi0, 0.0);
        let mut worst: f64 = 0.0;
        let mut err = None;
        run_nonlinear_sme(p, &rho0, w, PositivityPolicy::Ignore, 1, |k, t, rho| {
            if err.is_some() {
                return;
            }
            let lab = p.ket_to_lab(&phi, t);
            worst = worst.max(hs_norm(&(rho - outer(&lab))));
            if k < w.steps() {
                match nonlinear_pure_increment(&p.frame(t), &phi, dt, w.increment(k)) {
                    Ok(s) => phi = s.state,
                    Err(e) => err = Some(e),
                }
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(worst),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformDirection {
    /// Normalize a linear path and compare with one normalized Euler step.
    Normalize,
    /// Reconstruct a normalized path and compare with one linear Euler step.
    Reconstruct,
}

/// Mean one-step residual of a transformed path against the target
/// equation's Euler step (Schrödinger-picture parameters expected).
pub fn transform_residual(cfg: &HalvingConfig, gamma0: &Operator, direction: TransformDirection) -> Result<HalvingReport> {
    let label = match direction {
        TransformDirection::Normalize => "normalized_residual",
        TransformDirection::Reconstruct => "reconstructed_residual",
    };
    halving(label, cfg, |p, w| {
        let frame = p.lab_frame();
        let dt = p.dt();
        let (states, incr) = match direction {
            TransformDirection::Normalize => {
                let rec = normalize_path(&record_linear_sme(p, gamma0, w)?)?;
                (rec.states, rec.innovation_increments)
            }
            TransformDirection::Reconstruct => {
                let rho0 = gamma0 / crate::linalg::c(crate::linalg::trace_re(gamma0), 0.0);
                let rec = reconstruct_path(&record_nonlinear_sme(p, &rho0, w, PositivityPolicy::Ignore)?, 1.0)?;
                (rec.states, rec.output_increments)
            }
        };
        let total: f64 = (0..incr.len())
            .map(|k| {
                let step = match direction {
                    TransformDirection::Normalize => nonlinear_sme_increment(frame, &states[k], dt, &incr[k]),
                    TransformDirection::Reconstruct => linear_sme_increment(frame, &states[k], dt, &incr[k]),
                };
                hs_norm(&(&states[k + 1] - step))
            })
            .sum();
        Ok(total / incr.len().max(1) as f64)
    })
}
