//! Mean-field (McKean–Vlasov) extension of the normalized and linear
//! equations: interaction maps, the frozen-field stepper, Picard iteration
//! over Monte Carlo means with common random numbers, and Girsanov
//! reweighting of linear paths.

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{
    check_density, check_finite, hs_norm, operator_norm, symmetrize, trace, trace_norm, Operator, C64,
    DEFAULT_POS_TOL,
};
use crate::master::{
    checkpoint_steps, linear_sme_increment, linear_sme_step, mean_over_trajectories, nonlinear_sme_increment,
    nonlinear_sme_step, MeanPath, TrajectoryRecord,
};
use crate::montecarlo::KahanSum;
use crate::noise::WienerPath;
use crate::system::{Frame, SystemParams};

/// Bounded map from density operators to Hermitian operators.
#[derive(Debug, Clone, PartialEq)]
pub enum InteractionMap {
    Zero,
    /// `vec(A(ν)) = K vec(ν)` with row-major `vec`; `constant ≥ ‖K‖_op`.
    HsKernel { kernel: DMatrix<C64>, constant: f64 },
    /// `A(ν) = diag_x(Σ_y A(x, y) ν_yy)`; `constant = sup |A(x, y)|`.
    Potential { table: DMatrix<f64>, constant: f64 },
}

impl InteractionMap {
    pub fn hs_kernel(kernel: DMatrix<C64>) -> Result<Self> {
        let n = kernel.nrows();
        let d = (n as f64).sqrt().round() as usize;
        if d * d != n || kernel.ncols() != n || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel must be d²×d², got {}×{}",
                kernel.nrows(),
                kernel.ncols()
            )));
        }
        let constant = operator_norm(&kernel);
        Ok(Self::HsKernel { kernel, constant })
    }

    pub fn potential(table: DMatrix<f64>) -> Result<Self> {
        if table.nrows() != table.ncols() || table.nrows() == 0 {
            return Err(Error::InvalidParameter("potential table must be square".into()));
        }
        if (&table - table.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidParameter("potential table must be symmetric".into()));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("potential table must be finite".into()));
        }
        let constant = table.abs().max();
        Ok(Self::Potential { table, constant })
    }

    /// Declared Lipschitz constant `C_A`.
    pub fn constant(&self) -> f64 {
        match self {
            InteractionMap::Zero => 0.0,
            InteractionMap::HsKernel { constant, .. } | InteractionMap::Potential { constant, .. } => *constant,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, InteractionMap::Zero)
    }

    /// Same map with its constant multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            InteractionMap::Zero => InteractionMap::Zero,
            InteractionMap::HsKernel { kernel, constant } => InteractionMap::HsKernel {
                kernel: kernel * C64::from(factor),
                constant: constant * factor.abs(),
            },
            InteractionMap::Potential { table, constant } => InteractionMap::Potential {
                table: table * factor,
                constant: constant * factor.abs(),
            },
        }
    }
}

/// `A(η)`, or `A(η̄)` with entrywise conjugation when `conjugate` is set.
pub fn apply_interaction(map: &InteractionMap, eta: &Operator, conjugate: bool) -> Result<Operator> {
    let d = eta.nrows();
    ensure_dim(d, eta.ncols())?;
    let eta = if conjugate { eta.conjugate() } else { eta.clone() };
    Ok(match map {
        InteractionMap::Zero => Operator::zeros(d, d),
        InteractionMap::HsKernel { kernel, .. } => {
            ensure_dim(kernel.nrows(), d * d)?;
            let v = nalgebra::DVector::from_iterator(d * d, eta.transpose().iter().copied());
            let out = kernel * v;
            symmetrize(&Operator::from_row_slice(d, d, out.as_slice()))
        }
        InteractionMap::Potential { table, .. } => {
            ensure_dim(table.nrows(), d)?;
            let mut out = Operator::zeros(d, d);
            for x in 0..d {
                let s: f64 = (0..d).map(|y| table[(x, y)] * eta[(y, y)].re).sum();
                out[(x, x)] = C64::from(s);
            }
            out
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanFieldMode {
    /// Normalized equation driven by Brownian innovations; `η = E ρ`.
    #[default]
    Normalized,
    /// Linear equation driven by a Brownian output; `η = E(γ / tr γ)`.
    Linear,
}

#[derive(Debug, Clone)]
pub struct MeanFieldConfig {
    pub base: SystemParams,
    pub interaction: InteractionMap,
    pub rho0: Operator,
    pub trajectories: usize,
    pub horizon: f64,
    pub picard_max_iter: usize,
    pub picard_tol: f64,
    pub mode: MeanFieldMode,
    pub seed: u64,
    pub conjugate: bool,
}

impl MeanFieldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 {
            return Err(Error::InvalidParameter("trajectories must be at least 1".into()));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidParameter("picard tolerance must be positive".into()));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter("horizon must be finite and nonnegative".into()));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::InvalidParameter("picard_max_iter must be at least 1".into()));
        }
        ensure_dim(self.base.dim(), self.rho0.nrows())?;
        check_density(&self.rho0, DEFAULT_POS_TOL)?;
        apply_interaction(&self.interaction, &self.rho0, false).map(|_| ())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.base.dt()).round() as usize
    }
}

fn frozen_frame<'a>(cfg: &'a MeanFieldConfig, eta: &Operator, t: f64) -> Result<std::borrow::Cow<'a, Frame>> {
    if cfg.interaction.is_zero() {
        Ok(cfg.base.frame(t))
    } else {
        cfg.base.frame_with(t, &apply_interaction(&cfg.interaction, eta, cfg.conjugate)?)
    }
}

/// One step with effective Hamiltonian `H + A(η)`; `state` is in the
/// propagation frame, `eta` in the Schrödinger picture.
pub fn frozen_field_step(
    state: &Operator,
    eta: &Operator,
    cfg: &MeanFieldConfig,
    t: f64,
    incr: &[f64],
) -> Result<Operator> {
    if cfg.interaction.is_zero() {
        return match cfg.mode {
            MeanFieldMode::Normalized => nonlinear_sme_step(state, &cfg.base, t, incr),
            MeanFieldMode::Linear => linear_sme_step(state, &cfg.base, t, incr),
        };
    }
    ensure_dim(cfg.base.dim(), state.nrows())?;
    cfg.base.check_increment(incr)?;
    let frame = frozen_frame(cfg, eta, t)?;
    Ok(match cfg.mode {
        MeanFieldMode::Normalized => {
            crate::master::check_unit_trace(state)?;
            nonlinear_sme_increment(&frame, state, cfg.base.dt(), incr)
        }
        MeanFieldMode::Linear => linear_sme_increment(&frame, state, cfg.base.dt(), incr),
    })
}

/// `Φ(η)`: the Monte Carlo mean path under the frozen field `η` (one
/// operator per step, left-continuous).
pub fn picard_map(cfg: &MeanFieldConfig, eta: &[Operator]) -> Result<MeanPath> {
    let steps = cfg.steps();
    ensure_dim(steps + 1, eta.len())?;
    let base = &cfg.base;
    let dt = base.dt();
    let times = (0..=steps).map(|k| k as f64 * dt).collect();
    mean_over_trajectories(cfg.trajectories, base.dim(), times, |i| {
        let w = WienerPath::for_trajectory(base.channels(), steps, dt, cfg.seed, i as u64)?;
        let mut state = base.from_lab(&cfg.rho0, 0.0);
        let mut out = Vec::with_capacity(steps + 1);
        out.push(cfg.rho0.clone());
        for k in 0..steps {
            let t = k as f64 * dt;
            let frame = frozen_frame(cfg, &eta[k], t)?;
            state = match cfg.mode {
                MeanFieldMode::Normalized => nonlinear_sme_increment(&frame, &state, dt, w.increment(k)),
                MeanFieldMode::Linear => linear_sme_increment(&frame, &state, dt, w.increment(k)),
            };
            if !check_finite(&state) {
                return Err(Error::TrajectoryAbort { step: k + 1, reason: "non-finite state".into() });
            }
            let lab = base.to_lab(&state, (k + 1) as f64 * dt);
            out.push(match cfg.mode {
                MeanFieldMode::Normalized => lab,
                MeanFieldMode::Linear => {
                    let tr = trace(&lab).re;
                    if !(tr > 0.0) {
                        return Err(Error::TrajectoryAbort {
                            step: k + 1,
                            reason: format!("nonpositive trace {tr}"),
                        });
                    }
                    lab / C64::from(tr)
                }
            });
        }
        Ok(out)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    /// `sup_t ‖η_k(t) − η_{k−1}(t)‖_HS` for `k = 1, 2, …`.
    pub iteration_distances: Vec<f64>,
    /// Same in trace norm.
    pub trace_norm_distances: Vec<f64>,
    pub converged: bool,
    pub times: Vec<f64>,
    pub mean_field_path: Vec<Operator>,
    /// Largest Monte Carlo HS standard error along the final iterate.
    pub max_stderr: f64,
    /// Set when `picard_tol < 3 · max_stderr`.
    pub below_noise_floor: bool,
}

impl PicardReport {
    /// Distances, flags and the mean-field path every `stride` steps.
    pub fn to_json(&self, stride: usize) -> Value {
        let marks = checkpoint_steps(self.times.len().saturating_sub(1), stride);
        let path: Vec<Value> = marks
            .iter()
            .map(|&k| {
                let m = &self.mean_field_path[k];
                let entries: Vec<[f64; 2]> = m.transpose().iter().map(|z| [z.re, z.im]).collect();
                json!({ "t": self.times[k], "eta": entries })
            })
            .collect();
        json!({
            "iteration_distances": self.iteration_distances,
            "trace_norm_distances": self.trace_norm_distances,
            "converged": self.converged,
            "max_stderr": self.max_stderr,
            "below_noise_floor": self.below_noise_floor,
            "mean_field_path": path,
        })
    }
}

fn sup_distance(a: &[Operator], b: &[Operator], norm: fn(&Operator) -> f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| norm(&(x - y))).fold(0.0, f64::max)
}

/// Picard iteration `η_{k+1} = Φ(η_k)` from the constant path `η_0 ≡ ρ0`.
pub fn mckean_vlasov_solve(cfg: &MeanFieldConfig) -> Result<PicardReport> {
    cfg.validate()?;
    let steps = cfg.steps();
    let mut eta = vec![cfg.rho0.clone(); steps + 1];
    let mut distances = Vec::new();
    let mut tn_distances = Vec::new();
    let mut last = None;
    for _ in 0..cfg.picard_max_iter {
        let next = picard_map(cfg, &eta)?;
        let dist = sup_distance(&next.mean, &eta, hs_norm);
        distances.push(dist);
        tn_distances.push(sup_distance(&next.mean, &eta, trace_norm));
        eta = next.mean.clone();
        last = Some(next);
        if dist <= cfg.picard_tol {
            break;
        }
    }
    let last = last.expect("at least one iteration");
    let max_stderr = last.stderr.iter().copied().fold(0.0, f64::max);
    Ok(PicardReport {
        converged: distances.last().is_some_and(|d| *d <= cfg.picard_tol),
        iteration_distances: distances,
        trace_norm_distances: tn_distances,
        times: last.times,
        mean_field_path: last.mean,
        max_stderr,
        below_noise_floor: cfg.picard_tol < 3.0 * max_stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEstimate {
    pub estimate: f64,
    /// Delta-method standard error of the ratio estimator.
    pub stderr: f64,
    /// `(Σ T)² / Σ T²`.
    pub ess: f64,
    /// Set when the effective sample size drops below 10.
    pub degenerate: bool,
}

/// Self-normalized estimate `Σ T_i f_i / Σ T_i`.
pub fn weighted_mean(weights: &[f64], values: &[f64]) -> Result<WeightedEstimate> {
    ensure_dim(weights.len(), values.len())?;
    if weights.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::InvalidParameter(format!("weights must be positive, got {w}")));
    }
    let n = weights.len() as f64;
    let sw: KahanSum = weights.iter().copied().collect();
    let swf: KahanSum = weights.iter().zip(values).map(|(w, f)| w * f).collect();
    let sw2: KahanSum = weights.iter().map(|w| w * w).collect();
    let estimate = swf.value() / sw.value();
    let wbar = sw.value() / n;
    let resid: KahanSum = weights
        .iter()
        .zip(values)
        .map(|(w, f)| (w * (f - estimate)).powi(2))
        .collect();
    let stderr = if weights.len() > 1 {
        (resid.value() / (n - 1.0)).sqrt() / (wbar * n.sqrt())
    } else {
        f64::INFINITY
    };
    let ess = sw.value().powi(2) / sw2.value();
    Ok(WeightedEstimate {
        estimate,
        stderr,
        ess,
        degenerate: ess < 10.0,
    })
}

/// Estimate of `tr(A ρ(t_step))` under the physical measure from linear
/// paths simulated under the reference measure, weighted by `tr γ(t_step)`.
pub fn reweighted_expectation(
    paths: &[TrajectoryRecord],
    observable: &Operator,
    step: usize,
) -> Result<WeightedEstimate> {
    let mut weights = Vec::with_capacity(paths.len());
    let mut values = Vec::with_capacity(paths.len());
    for p in paths {
        let g = p
            .states
            .get(step)
            .ok_or_else(|| Error::InvalidParameter(format!("step {step} beyond path length")))?;
        let tr = trace(g).re;
        weights.push(tr);
        values.push((observable * g).trace().re / tr);
    }
    weighted_mean(&weights, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, diagonal, identity, pauli_x, pauli_z, zeros};
    use crate::master::{monte_carlo_mean_path, record_linear_sme};
    use crate::noise::sample_wiener;
    use crate::random::{random_density, random_hermitian, random_operator};
    use crate::system::Picture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(interaction: InteractionMap) -> MeanFieldConfig {
        MeanFieldConfig {
            base: SystemParams::new(pauli_x() * c(0.3, 0.0), vec![pauli_z() * c(0.6, 0.0)], 0.01, Picture::Schroedinger)
                .unwrap(),
            interaction,
            rho0: Operator::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.3, 0.0)]),
            trajectories: 40,
            horizon: 0.2,
            picard_max_iter: 6,
            picard_tol: 1e-12,
            mode: MeanFieldMode::Normalized,
            seed: 11,
            conjugate: false,
        }
    }

    #[test]
    fn interaction_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let eta = random_density(3, 3, &mut rng);
        assert_eq!(apply_interaction(&InteractionMap::Zero, &eta, false).unwrap(), zeros(3));
        let pot = InteractionMap::potential(DMatrix::from_element(3, 3, 0.7)).unwrap();
        let a = apply_interaction(&pot, &eta, false).unwrap();
        assert!((a - identity(3) * c(0.7, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn kernel_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let map = InteractionMap::hs_kernel(random_operator(9, &mut rng)).unwrap();
        for _ in 0..200 {
            let nu = random_hermitian(3, &mut rng);
            let a = apply_interaction(&map, &nu, false).unwrap();
            assert!(hs_norm(&a) <= map.constant() * hs_norm(&nu) * (1.0 + 1e-12));
            assert!(crate::linalg::is_hermitian(&a));
        }
    }

    #[test]
    fn hand_built_kernel_step() {
        // A(η) = σ_z tr(σ_z η) as a rank-one kernel on row-major vec.
        let sz = pauli_z();
        let v: Vec<C64> = sz.transpose().iter().copied().collect();
        let kernel = DMatrix::from_fn(4, 4, |r, s| v[r] * v[s]);
        let map = InteractionMap::hs_kernel(kernel).unwrap();
        let mut cfg = cfg(map);
        cfg.base = SystemParams::new(zeros(2), vec![pauli_x()], 0.01, Picture::Schroedinger).unwrap();
        let eta = diagonal(&[0.8, 0.2]);
        let rho = cfg.rho0.clone();
        let got = frozen_field_step(&rho, &eta, &cfg, 0.0, &[0.1]).unwrap();
        let h = &sz * c(0.6, 0.0);
        let l = pauli_x();
        let m = 2.0 * (&l * &rho).trace().re;
        let drift = -(&h * &rho - &rho * &h) * c(0.0, 1.0) + &l * &rho * &l - &rho;
        let noise = &l * &rho + &rho * &l - &rho * c(m, 0.0);
        let want = &rho + drift * c(0.01, 0.0) + noise * c(0.1, 0.0);
        assert!((got - want).norm() < 1e-14);
    }

    #[test]
    fn maximally_mixed_potential_step_equals_free_step() {
        let pot = InteractionMap::potential(DMatrix::from_element(2, 2, 1.3)).unwrap();
        let cfg = cfg(pot);
        let mixed = diagonal(&[0.5, 0.5]);
        let a = frozen_field_step(&mixed, &mixed, &cfg, 0.0, &[0.2]).unwrap();
        let b = nonlinear_sme_step(&mixed, &cfg.base, 0.0, &[0.2]).unwrap();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn zero_interaction_reduces_bitwise() {
        let cfg = cfg(InteractionMap::Zero);
        let report = mckean_vlasov_solve(&cfg).unwrap();
        assert!(report.converged);
        assert_eq!(report.iteration_distances.len(), 2);
        assert_eq!(report.iteration_distances[1], 0.0);
        let mc = monte_carlo_mean_path(&cfg.base, &cfg.rho0, cfg.steps(), cfg.trajectories, cfg.seed, 1).unwrap();
        assert_eq!(mc.mean, report.mean_field_path);
        let step = frozen_field_step(&cfg.rho0, &cfg.rho0, &cfg, 0.0, &[0.3]).unwrap();
        assert_eq!(step, nonlinear_sme_step(&cfg.rho0, &cfg.base, 0.0, &[0.3]).unwrap());
    }

    #[test]
    fn picard_is_deterministic_and_valid() {
        let pot = InteractionMap::potential(DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])).unwrap();
        let a = mckean_vlasov_solve(&cfg(pot.clone())).unwrap();
        let b = mckean_vlasov_solve(&cfg(pot)).unwrap();
        assert_eq!(a, b);
        for eta in &a.mean_field_path {
            assert!((trace(eta).re - 1.0).abs() < 1e-10);
            assert!(crate::linalg::min_eigenvalue(eta) > -1e-9);
        }
    }

    #[test]
    fn weighted_mean_special_cases() {
        let p = SystemParams::new(zeros(2), vec![zeros(2)], 0.01, Picture::Schroedinger).unwrap();
        let g0 = diagonal(&[0.9, 0.6]);
        let paths: Vec<_> = (0..20)
            .map(|s| record_linear_sme(&p, &g0, &sample_wiener(1, 5, 0.01, s).unwrap()).unwrap())
            .collect();
        let e = reweighted_expectation(&paths, &identity(2), 5).unwrap();
        assert!((e.estimate - 1.0).abs() < 1e-15);
        assert!((e.ess - 20.0).abs() < 1e-9);
        assert!(weighted_mean(&[1.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(weighted_mean(&[1.0; 5], &[0.0; 5]).unwrap().degenerate);
    }
}
