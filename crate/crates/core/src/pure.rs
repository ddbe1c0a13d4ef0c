//! Pure-state filters: Euler–Maruyama steppers for the linear and the
//! normalized (trace-preserving) filtering equations, the scalar norm
//! processes and the mean map `ψ ↦ ⟨M⟩_ψ ψ`.

use nalgebra::{DMatrix, SVD};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{Ket, Operator, C64, I};
use crate::system::{Frame, SystemParams};

/// `⟨A⟩_φ = (φ, Aφ)/(φ, φ)`.
pub fn expectation(a: &Operator, phi: &Ket) -> Result<C64> {
    ensure_dim(a.ncols(), phi.len())?;
    let n2 = phi.norm_squared();
    if n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(phi.dotc(&(a * phi)) / n2)
}

/// `⟨L_S⟩_φ = Re⟨L⟩_φ` for each channel.
pub fn symmetric_expectations(frame: &Frame, phi: &Ket) -> Result<Vec<f64>> {
    let n2 = phi.norm_squared();
    if n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(frame
        .couplings
        .iter()
        .map(|l| phi.dotc(&(l * phi)).re / n2)
        .collect())
}

fn check_ket(params: &SystemParams, x: &Ket, incr: &[f64]) -> Result<()> {
    ensure_dim(params.dim(), x.len())?;
    params.check_increment(incr)
}

pub(crate) fn linear_pure_increment(frame: &Frame, chi: &Ket, dt: f64, dy: &[f64]) -> Ket {
    let mut out = chi + frame.linear_generator() * chi * C64::from(dt);
    for (l, y) in frame.couplings.iter().zip(dy) {
        out += l * chi * C64::from(*y);
    }
    out
}

/// One Euler–Maruyama step of `dχ = −[iH + ½L*L]χ dt + Lχ dY`.
///
/// In the interaction picture `χ` is the frame vector `e^{iHt}χ` and the
/// couplings are dressed at the step's left end `t`.
pub fn linear_pure_step(chi: &Ket, params: &SystemParams, t: f64, dy: &[f64]) -> Result<Ket> {
    check_ket(params, chi, dy)?;
    Ok(linear_pure_increment(&params.frame(t), chi, params.dt(), dy))
}

/// Drift of the trace-preserving normalized filter at `φ`:
/// `−[i(H − Σ⟨L_S⟩L_A) + ½ Σ (L − ⟨L_S⟩)*(L − ⟨L_S⟩)]φ`.
pub fn nonlinear_pure_drift(phi: &Ket, params: &SystemParams, t: f64) -> Result<Ket> {
    ensure_dim(params.dim(), phi.len())?;
    let frame = params.frame(t);
    let means = symmetric_expectations(&frame, phi)?;
    Ok(nonlinear_drift_in(&frame, phi, &means))
}

fn nonlinear_drift_in(frame: &Frame, phi: &Ket, means: &[f64]) -> Ket {
    let mut drift = match &frame.hamiltonian {
        Some(h) => -(h * phi) * I,
        None => Ket::zeros(phi.len()),
    };
    for ((l, ld), m) in frame.couplings.iter().zip(&frame.couplings_adj).zip(means) {
        let lphi = l * phi;
        let ldphi = ld * phi;
        // L_A φ = (Lφ − L*φ)/2i, so i·m·L_A φ = m(Lφ − L*φ)/2.
        drift += (&lphi - &ldphi) * C64::from(0.5 * m);
        let kphi = &lphi - phi * C64::from(*m);
        let kdk = ld * &kphi - &kphi * C64::from(*m);
        drift -= kdk * C64::from(0.5);
    }
    drift
}

#[derive(Debug, Clone)]
pub struct NonlinearPureStep {
    /// Renormalized state after the step.
    pub state: Ket,
    /// `‖φ'‖²/‖φ‖² − 1` before renormalization.
    pub norm_defect: f64,
}

pub(crate) fn nonlinear_pure_increment(
    frame: &Frame,
    phi: &Ket,
    dt: f64,
    db: &[f64],
) -> Result<NonlinearPureStep> {
    let n2 = phi.norm_squared();
    let means = symmetric_expectations(frame, phi)?;
    let mut out = phi + nonlinear_drift_in(frame, phi, &means) * C64::from(dt);
    for ((l, m), b) in frame.couplings.iter().zip(&means).zip(db) {
        out += (l * phi - phi * C64::from(*m)) * C64::from(*b);
    }
    let new_n2 = out.norm_squared();
    if new_n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(NonlinearPureStep {
        state: out.unscale(new_n2.sqrt()),
        norm_defect: new_n2 / n2 - 1.0,
    })
}

/// One Euler–Maruyama step of the trace-preserving normalized filter driven
/// by innovation increments `dB`, followed by renormalization.
pub fn nonlinear_pure_step(
    phi: &Ket,
    params: &SystemParams,
    t: f64,
    db: &[f64],
) -> Result<NonlinearPureStep> {
    check_ket(params, phi, db)?;
    nonlinear_pure_increment(&params.frame(t), phi, params.dt(), db)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormProcess {
    /// `d‖χ‖² = 2‖χ‖² Σ_j ⟨L_Sj⟩ dY_j`.
    SquaredNorm,
    /// `d(1/‖χ‖²) = −(2/‖χ‖²) Σ_j ⟨L_Sj⟩ dB_j`.
    InverseSquaredNorm,
}

pub fn norm_process_step(
    kind: NormProcess,
    value: f64,
    compensator: &[f64],
    incr: &[f64],
) -> Result<f64> {
    ensure_dim(compensator.len(), incr.len())?;
    if !(value > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "norm process must stay positive, got {value}"
        )));
    }
    let s: f64 = compensator.iter().zip(incr).map(|(m, x)| m * x).sum();
    let next = match kind {
        NormProcess::SquaredNorm => value + 2.0 * value * s,
        NormProcess::InverseSquaredNorm => value - 2.0 * value * s,
    };
    if next > 0.0 {
        Ok(next)
    } else {
        Err(Error::TrajectoryAbort {
            step: 0,
            reason: format!("norm process collapsed to {next}"),
        })
    }
}

/// `f(ψ) = ⟨M⟩_ψ ψ`.
pub fn mean_map(m: &Operator, psi: &Ket) -> Result<Ket> {
    Ok(psi * expectation(m, psi)?)
}

/// Operator norm of the real-linear Jacobian of [`mean_map`] at `ψ`, with
/// `Re ψ` and `Im ψ` as independent real coordinates, by central differences.
pub fn jacobian_norm_estimate(m: &Operator, psi: &Ket) -> Result<f64> {
    let d = psi.len();
    mean_map(m, psi)?;
    let h = 1e-6 * psi.norm();
    let mut jac = DMatrix::<f64>::zeros(2 * d, 2 * d);
    for k in 0..2 * d {
        let dir = if k < d { C64::new(h, 0.0) } else { C64::new(0.0, h) };
        let mut plus = psi.clone();
        let mut minus = psi.clone();
        plus[k % d] += dir;
        minus[k % d] -= dir;
        let diff = (mean_map(m, &plus)? - mean_map(m, &minus)?) / C64::from(2.0 * h);
        for r in 0..d {
            jac[(r, k)] = diff[r].re;
            jac[(r + d, k)] = diff[r].im;
        }
    }
    Ok(SVD::new(jac, false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_ket, c, identity, pauli_x, pauli_z, zeros};
    use crate::system::Picture;

    fn params(h: Operator, l: Operator, dt: f64) -> SystemParams {
        SystemParams::new(h, vec![l], dt, Picture::Schroedinger).unwrap()
    }

    #[test]
    fn expectation_values() {
        let up = basis_ket(2, 0);
        assert!((expectation(&pauli_z(), &up).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        let phi = Ket::from_vec(vec![c(0.3, 0.1), c(-0.7, 0.2)]);
        assert!((expectation(&identity(2), &phi).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        let a = pauli_x() + pauli_z() * c(0.0, 0.5);
        let e1 = expectation(&a, &phi).unwrap();
        let e2 = expectation(&a, &(&phi * c(-2.0, 3.0))).unwrap();
        assert!((e1 - e2).norm() < 1e-14);
        assert_eq!(expectation(&a, &Ket::zeros(2)), Err(Error::ZeroVector));
    }

    #[test]
    fn linear_step_without_coupling_is_schroedinger_euler() {
        let h = pauli_x() * c(0.7, 0.0);
        let p = params(h.clone(), zeros(2), 0.01);
        let chi = Ket::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let got = linear_pure_step(&chi, &p, 0.0, &[0.3]).unwrap();
        let want = &chi - &h * &chi * c(0.0, 0.01);
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    fn linear_step_on_pauli_z_eigenvector() {
        let (dt, dy) = (0.01, 0.07);
        let p = params(zeros(2), pauli_z(), dt);
        let got = linear_pure_step(&basis_ket(2, 0), &p, 0.0, &[dy]).unwrap();
        let want = basis_ket(2, 0) * c(1.0 - dt / 2.0 + dy, 0.0);
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    fn eigenvector_is_a_fixed_point() {
        let p = params(zeros(2), pauli_z(), 0.01);
        let step = nonlinear_pure_step(&basis_ket(2, 1), &p, 0.0, &[0.4]).unwrap();
        assert!((step.state - basis_ket(2, 1)).norm() < 1e-15);
        assert!(step.norm_defect.abs() < 1e-15);
    }

    #[test]
    fn norm_process_special_cases() {
        let v = norm_process_step(NormProcess::SquaredNorm, 1.3, &[0.0, 0.0], &[0.2, -0.1]).unwrap();
        assert_eq!(v, 1.3);
        let v = norm_process_step(NormProcess::InverseSquaredNorm, 2.0, &[0.5], &[0.1]).unwrap();
        assert!((v - 1.8).abs() < 1e-15);
        assert!(norm_process_step(NormProcess::SquaredNorm, 0.0, &[1.0], &[0.1]).is_err());
        assert!(norm_process_step(NormProcess::SquaredNorm, 1.0, &[1.0], &[-0.6]).is_err());
    }

    #[test]
    fn mean_map_identity_and_eigenvector() {
        let psi = Ket::from_vec(vec![c(0.2, 0.4), c(-0.5, 0.1), c(0.3, 0.0)]);
        assert!((mean_map(&identity(3), &psi).unwrap() - &psi).norm() < 1e-15);
        let j = jacobian_norm_estimate(&identity(3), &psi).unwrap();
        assert!((j - 1.0).abs() < 1e-8, "{j}");
        let m = crate::linalg::diagonal(&[2.0, -1.0]);
        let e = basis_ket(2, 1);
        assert!((mean_map(&m, &e).unwrap() + &e).norm() < 1e-15);
    }
}
