//! Mixed-state engines: the Lindblad generator, the linear and normalized
//! stochastic master equation steppers, the trace processes and the
//! deterministic Lindblad solver used as a noise-averaged reference.

mod record;

pub use record::*;

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{check_density, symmetrize_in_place, Operator, C64, DEFAULT_POS_TOL, I};
use crate::system::{Frame, SystemParams};

/// Trace deviation accepted on entry to the normalized stepper.
pub const INPUT_TRACE_TOL: f64 = 1e-8;

/// `Σ_j [L_j γ L_j* − ½{L_j*L_j, γ}]`.
pub fn lindblad_generator(gamma: &Operator, ls: &[Operator]) -> Result<Operator> {
    let dim = gamma.nrows();
    ensure_dim(dim, gamma.ncols())?;
    let mut out = Operator::zeros(dim, dim);
    for l in ls {
        ensure_dim(dim, l.nrows())?;
        ensure_dim(dim, l.ncols())?;
        let ld = l.adjoint();
        let lg = l * gamma;
        let ldl = &ld * l;
        out += &lg * &ld - (&ldl * gamma + gamma * &ldl) * C64::from(0.5);
    }
    Ok(out)
}

/// `tr(Lγ)` without forming the product.
fn trace_of_product(l: &Operator, gamma: &Operator) -> C64 {
    let d = l.nrows();
    let mut s = C64::default();
    for r in 0..d {
        for k in 0..d {
            s += l[(r, k)] * gamma[(k, r)];
        }
    }
    s
}

/// `m_j = tr(L_j ρ + ρ L_j*)` per channel.
pub fn measurement_compensator(rho: &Operator, ls: &[Operator]) -> Vec<f64> {
    ls.iter().map(|l| 2.0 * trace_of_product(l, rho).re).collect()
}

/// `−i[H, x] + Σ_j L_j x L_j* − {½ΣL*L, x}` for Hermitian `x`.
pub(crate) fn drift_in(frame: &Frame, x: &Operator) -> Operator {
    let mut out = -(&frame.damping * x);
    if let Some(h) = &frame.hamiltonian {
        out -= h * x * I;
    }
    // Both pieces so far are of the form Kx; adding the adjoint gives Kx + xK†.
    out += out.adjoint();
    for (l, ld) in frame.couplings.iter().zip(&frame.couplings_adj) {
        out += l * x * ld;
    }
    out
}

pub(crate) fn linear_sme_increment(frame: &Frame, gamma: &Operator, dt: f64, dy: &[f64]) -> Operator {
    let mut out = gamma + drift_in(frame, gamma) * C64::from(dt);
    for (l, y) in frame.couplings.iter().zip(dy) {
        let lg = l * gamma;
        out += (&lg + lg.adjoint()) * C64::from(*y);
    }
    symmetrize_in_place(&mut out);
    out
}

pub(crate) fn nonlinear_sme_increment(frame: &Frame, rho: &Operator, dt: f64, db: &[f64]) -> Operator {
    let mut out = rho + drift_in(frame, rho) * C64::from(dt);
    for (l, b) in frame.couplings.iter().zip(db) {
        let lr = l * rho;
        let m = 2.0 * lr.trace().re;
        out += (&lr + lr.adjoint() - rho * C64::from(m)) * C64::from(*b);
    }
    symmetrize_in_place(&mut out);
    out
}

/// One Euler–Maruyama step of the linear stochastic master equation
/// `dγ = −i[H,γ]dt + 𝓛γ dt + Σ_j (L_jγ + γL_j*) dY_j`.
pub fn linear_sme_step(gamma: &Operator, params: &SystemParams, t: f64, dy: &[f64]) -> Result<Operator> {
    ensure_dim(params.dim(), gamma.nrows())?;
    ensure_dim(params.dim(), gamma.ncols())?;
    params.check_increment(dy)?;
    Ok(linear_sme_increment(&params.frame(t), gamma, params.dt(), dy))
}

pub(crate) fn check_unit_trace(rho: &Operator) -> Result<()> {
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > INPUT_TRACE_TOL || tr.im.abs() > INPUT_TRACE_TOL {
        return Err(Error::InvalidDensity(format!("trace {} deviates from 1", tr.re)));
    }
    Ok(())
}

/// One Euler–Maruyama step of the normalized stochastic master equation
/// `dρ = −i[H,ρ]dt + 𝓛ρ dt + Σ_j [L_jρ + ρL_j* − ρ tr(L_jρ + ρL_j*)] dB_j`.
pub fn nonlinear_sme_step(rho: &Operator, params: &SystemParams, t: f64, db: &[f64]) -> Result<Operator> {
    ensure_dim(params.dim(), rho.nrows())?;
    ensure_dim(params.dim(), rho.ncols())?;
    params.check_increment(db)?;
    check_unit_trace(rho)?;
    Ok(nonlinear_sme_increment(&params.frame(t), rho, params.dt(), db))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceDirection {
    /// `dT = Σ_j tr(L_jγ + γL_j*) dY_j = T Σ_j m_j dY_j`.
    Forward,
    /// `d(1/T) = −(1/T) Σ_j m_j dB_j`.
    Inverse,
}

/// Euler update of the trace (or inverse trace) process with compensators
/// `m_j = tr(L_jρ + ρL_j*)` evaluated at the normalized state.
pub fn trace_process_step(
    value: f64,
    rho: &Operator,
    ls: &[Operator],
    incr: &[f64],
    direction: TraceDirection,
) -> Result<f64> {
    ensure_dim(ls.len(), incr.len())?;
    if !(value > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "trace process must be positive, got {value}"
        )));
    }
    let m = measurement_compensator(rho, ls);
    let s: f64 = m.iter().zip(incr).map(|(a, b)| a * b).sum();
    let next = match direction {
        TraceDirection::Forward => value * (1.0 + s),
        TraceDirection::Inverse => value * (1.0 - s),
    };
    if next > 0.0 {
        Ok(next)
    } else {
        Err(Error::TrajectoryAbort {
            step: 0,
            reason: format!("trace process reached {next}"),
        })
    }
}

/// Classical RK4 for `dη/dt = −i[H,η] + 𝓛η` with `steps` uniform steps.
pub fn lindblad_rk4(rho0: &Operator, params: &SystemParams, t: f64, steps: usize) -> Operator {
    let frame = params.lab_frame();
    let steps = steps.max(1);
    let h = t / steps as f64;
    let hc = C64::from(h);
    let mut x = rho0.clone();
    for _ in 0..steps {
        let k1 = drift_in(frame, &x);
        let k2 = drift_in(frame, &(&x + &k1 * (hc * 0.5)));
        let k3 = drift_in(frame, &(&x + &k2 * (hc * 0.5)));
        let k4 = drift_in(frame, &(&x + &k3 * hc));
        x += (k1 + (k2 + k3) * C64::from(2.0) + k4) * (hc / 6.0);
        symmetrize_in_place(&mut x);
    }
    x
}

/// Forward Euler for the same ODE; this is exactly the mean of the
/// Euler–Maruyama normalized stepper at step `h`.
pub fn lindblad_euler(rho0: &Operator, params: &SystemParams, t: f64, steps: usize) -> Operator {
    let frame = params.lab_frame();
    let steps = steps.max(1);
    let h = C64::from(t / steps as f64);
    let mut x = rho0.clone();
    for _ in 0..steps {
        x += drift_in(frame, &x) * h;
        symmetrize_in_place(&mut x);
    }
    x
}

/// Noise-averaged evolution of a density operator to time `t` by RK4 with
/// step `min(dt, 0.01)`.
pub fn deterministic_lindblad_solve(rho0: &Operator, params: &SystemParams, t: f64) -> Result<Operator> {
    ensure_dim(params.dim(), rho0.nrows())?;
    check_density(rho0, DEFAULT_POS_TOL)?;
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let h = params.dt().min(0.01);
    let steps = (t.abs() / h).ceil() as usize;
    Ok(lindblad_rk4(rho0, params, t, steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, diagonal, identity, outer, pauli_x, pauli_z, zeros, basis_ket};
    use crate::system::Picture;

    fn close(a: &Operator, b: &Operator, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn generator_special_cases() {
        let g = diagonal(&[0.3, 0.7]);
        assert!(lindblad_generator(&g, &[identity(2)]).unwrap().norm() < 1e-15);
        let p0 = diagonal(&[1.0, 0.0]);
        assert!(lindblad_generator(&p0, &[pauli_z()]).unwrap().norm() < 1e-15);
        let r = lindblad_generator(&p0, &[pauli_x()]).unwrap();
        assert!(close(&r, &diagonal(&[-1.0, 1.0]), 1e-15));
        assert!(lindblad_generator(&p0, &[identity(3)]).is_err());
    }

    #[test]
    fn hand_evaluated_linear_step() {
        let p = SystemParams::new(zeros(2), vec![pauli_x()], 0.01, Picture::Schroedinger).unwrap();
        let got = linear_sme_step(&diagonal(&[1.0, 0.0]), &p, 0.0, &[0.1]).unwrap();
        let want = Operator::from_row_slice(
            2,
            2,
            &[c(0.99, 0.0), c(0.1, 0.0), c(0.1, 0.0), c(0.01, 0.0)],
        );
        assert!(close(&got, &want, 1e-15));
    }

    #[test]
    fn free_linear_step_is_identity() {
        let p = SystemParams::new(zeros(2), vec![zeros(2)], 0.01, Picture::Schroedinger).unwrap();
        let g = Operator::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.0)]);
        assert!(close(&linear_sme_step(&g, &p, 0.0, &[0.5]).unwrap(), &g, 0.0));
    }

    #[test]
    fn eigenprojector_is_nonlinear_fixed_point() {
        let p = SystemParams::new(zeros(2), vec![pauli_z()], 0.01, Picture::Schroedinger).unwrap();
        let rho = outer(&basis_ket(2, 0));
        let got = nonlinear_sme_step(&rho, &p, 0.0, &[0.37]).unwrap();
        assert!(close(&got, &rho, 1e-15));
    }

    #[test]
    fn nonlinear_step_rejects_bad_trace() {
        let p = SystemParams::new(zeros(2), vec![pauli_z()], 0.01, Picture::Schroedinger).unwrap();
        let err = nonlinear_sme_step(&diagonal(&[0.5, 0.4]), &p, 0.0, &[0.1]).unwrap_err();
        assert!(matches!(err, Error::InvalidDensity(_)));
    }

    #[test]
    fn trace_process_with_traceless_compensator() {
        let rho = diagonal(&[0.5, 0.5]);
        let v = trace_process_step(1.7, &rho, &[pauli_z()], &[0.3], TraceDirection::Forward).unwrap();
        assert_eq!(v, 1.7);
        let v = trace_process_step(1.7, &rho, &[pauli_z()], &[0.3], TraceDirection::Inverse).unwrap();
        assert_eq!(v, 1.7);
        assert!(trace_process_step(-1.0, &rho, &[pauli_z()], &[0.3], TraceDirection::Forward).is_err());
        let up = diagonal(&[1.0, 0.0]);
        let err = trace_process_step(1.0, &up, &[pauli_z()], &[-0.6], TraceDirection::Forward).unwrap_err();
        assert!(matches!(err, Error::TrajectoryAbort { .. }));
    }

    #[test]
    fn free_deterministic_solve() {
        let p = SystemParams::new(zeros(2), vec![zeros(2)], 0.01, Picture::Schroedinger).unwrap();
        let rho = Operator::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.0)]);
        assert!(close(&deterministic_lindblad_solve(&rho, &p, 2.0).unwrap(), &rho, 1e-15));
    }

    #[test]
    fn dephasing_closed_form() {
        let p = SystemParams::new(zeros(2), vec![pauli_z()], 0.01, Picture::Schroedinger).unwrap();
        let off = c(0.3, -0.2);
        let rho = Operator::from_row_slice(2, 2, &[c(0.5, 0.0), off, off.conj(), c(0.5, 0.0)]);
        for &t in &[0.1, 0.5, 1.0] {
            let r = deterministic_lindblad_solve(&rho, &p, t).unwrap();
            assert!((r[(0, 1)] - off * (-2.0 * t).exp()).norm() < 1e-9);
        }
    }
}
