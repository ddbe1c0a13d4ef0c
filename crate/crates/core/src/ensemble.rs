//! Weighted pure-state ensembles: a density operator unravelled into kets
//! that share one innovation path and one feedback term, with the density
//! recovered as a normalized weighted sum of outer products.

use serde_json::{json, Value};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{check_density, hermitian_spectrum, symmetrize_in_place, Ket, Operator, C64, DEFAULT_POS_TOL};
use crate::noise::Driver;
use crate::pure::linear_pure_increment;
use crate::system::SystemParams;

pub const DEFAULT_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    /// Nonincreasing, summing to one.
    pub weights: Vec<f64>,
    pub kets: Vec<Ket>,
    /// Number of retained terms.
    pub cutoff: usize,
    /// Eigenvalue mass discarded by the rank cut.
    pub dropped_mass: f64,
}

impl WeightedEnsemble {
    pub fn dim(&self) -> usize {
        self.kets[0].len()
    }

    /// `Σ_k p_k ‖e_k‖²`.
    pub fn total_norm(&self) -> f64 {
        self.weights.iter().zip(&self.kets).map(|(p, e)| p * e.norm_squared()).sum()
    }

    /// Weights and ket entries as `[re, im]` pairs.
    pub fn checkpoint(&self) -> Value {
        let kets: Vec<Vec<[f64; 2]>> = self
            .kets
            .iter()
            .map(|e| e.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        json!({ "weights": self.weights, "kets": kets, "dropped_mass": self.dropped_mass })
    }
}

/// Spectral decomposition `ρ0 = Σ p_k e_k e_k†`, dropping eigenvalues at or
/// below `rank_tol` and renormalizing the remaining weights.
pub fn decompose_state(rho0: &Operator, rank_tol: f64) -> Result<WeightedEnsemble> {
    check_density(rho0, DEFAULT_POS_TOL)?;
    let spec = hermitian_spectrum(rho0)?;
    let mut terms: Vec<(f64, Ket)> = spec
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| (*v, spec.vectors[k].clone()))
        .collect();
    terms.reverse();
    let total: f64 = terms.iter().map(|(v, _)| v.max(0.0)).sum();
    let kept: Vec<(f64, Ket)> = terms.into_iter().filter(|(v, _)| *v > rank_tol && *v > 0.0).collect();
    let mass: f64 = kept.iter().map(|(v, _)| v).sum();
    if kept.is_empty() || mass <= 0.0 {
        return Err(Error::InvalidDensity("no eigenvalue above the rank cut".into()));
    }
    Ok(WeightedEnsemble {
        weights: kept.iter().map(|(v, _)| v / mass).collect(),
        cutoff: kept.len(),
        kets: kept.into_iter().map(|(_, e)| e).collect(),
        dropped_mass: (total - mass).max(0.0),
    })
}

fn denominator(ens: &WeightedEnsemble) -> Result<f64> {
    let n = ens.total_norm();
    if n > 0.0 && n.is_finite() {
        Ok(n)
    } else {
        Err(Error::TrajectoryAbort {
            step: 0,
            reason: format!("ensemble norm {n} is not positive"),
        })
    }
}

/// `π_j = Σ_k p_k (e_k, (L_j + L_j*) e_k) / Σ_k p_k ‖e_k‖²`.
pub fn shared_feedback(ens: &WeightedEnsemble, ls: &[Operator]) -> Result<Vec<f64>> {
    let den = denominator(ens)?;
    ls.iter()
        .map(|l| {
            ensure_dim(ens.dim(), l.ncols())?;
            let num: f64 = ens
                .weights
                .iter()
                .zip(&ens.kets)
                .map(|(p, e)| p * 2.0 * e.dotc(&(l * e)).re)
                .sum();
            Ok(num / den)
        })
        .collect()
}

/// `ρ = Σ_k p_k e_k e_k† / Σ_k p_k ‖e_k‖²`.
pub fn reconstruct_density(ens: &WeightedEnsemble) -> Result<Operator> {
    let den = denominator(ens)?;
    let d = ens.dim();
    let mut rho = Operator::zeros(d, d);
    for (p, e) in ens.weights.iter().zip(&ens.kets) {
        rho.gerc(C64::from(p / den), e, e, C64::from(1.0));
    }
    symmetrize_in_place(&mut rho);
    Ok(rho)
}

/// One explicit step `de_k = (−iH − ½L*L)e_k dt + L e_k (dB + π dt)` with
/// `π` frozen at the step start. Kets are kept in the propagation frame and
/// are not renormalized.
pub fn ensemble_step(ens: &WeightedEnsemble, params: &SystemParams, t: f64, db: &[f64]) -> Result<WeightedEnsemble> {
    ensure_dim(params.dim(), ens.dim())?;
    params.check_increment(db)?;
    let frame = params.frame(t);
    let pi = shared_feedback(ens, &frame.couplings)?;
    let dt = params.dt();
    let dy: Vec<f64> = db.iter().zip(&pi).map(|(b, p)| b + p * dt).collect();
    Ok(WeightedEnsemble {
        weights: ens.weights.clone(),
        kets: ens.kets.iter().map(|e| linear_pure_increment(&frame, e, dt, &dy)).collect(),
        cutoff: ens.cutoff,
        dropped_mass: ens.dropped_mass,
    })
}

/// Steps a decomposed `ρ0` along `driver`, reporting the reconstructed
/// Schrödinger-picture density every `stride` steps and at the end.
pub fn run_ensemble<D, F>(
    params: &SystemParams,
    rho0: &Operator,
    driver: &D,
    rank_tol: f64,
    stride: usize,
    mut observe: F,
) -> Result<WeightedEnsemble>
where
    D: Driver + ?Sized,
    F: FnMut(usize, f64, &Operator),
{
    ensure_dim(params.channels(), driver.channels())?;
    let stride = stride.max(1);
    let mut ens = decompose_state(&params.from_lab(rho0, 0.0), rank_tol)?;
    observe(0, 0.0, &reconstruct_density(&ens)?);
    let dt = params.dt();
    let steps = driver.steps();
    for k in 0..steps {
        ens = ensemble_step(&ens, params, k as f64 * dt, &driver.increment_at(k)).map_err(|e| match e {
            Error::TrajectoryAbort { reason, .. } => Error::TrajectoryAbort { step: k, reason },
            other => other,
        })?;
        if (k + 1) % stride == 0 || k + 1 == steps {
            let t1 = (k + 1) as f64 * dt;
            observe(k + 1, t1, &params.to_lab(&reconstruct_density(&ens)?, t1));
        }
    }
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_ket, c, diagonal, identity, outer, pauli_x, pauli_z, trace_norm, zeros};
    use crate::pure::linear_pure_step;
    use crate::random::{random_density, random_ket, random_operator};
    use crate::system::Picture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_and_pure_decompositions() {
        let ens = decompose_state(&diagonal(&[0.25, 0.75]), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(ens.cutoff, 2);
        assert!((ens.weights[0] - 0.75).abs() < 1e-15 && (ens.weights[1] - 0.25).abs() < 1e-15);
        assert!((ens.kets[0][1].norm() - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = random_ket(3, &mut rng);
        let ens = decompose_state(&outer(&phi), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(ens.cutoff, 1);
        assert!((ens.kets[0].dotc(&phi).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(8, 8, &mut rng);
        let ens = decompose_state(&rho, 0.0).unwrap();
        assert!(trace_norm(&(reconstruct_density(&ens).unwrap() - &rho)) < 1e-9);
    }

    #[test]
    fn feedback_special_cases() {
        let ens = decompose_state(&outer(&basis_ket(2, 0)), DEFAULT_RANK_TOL).unwrap();
        assert!((shared_feedback(&ens, &[pauli_z()]).unwrap()[0] - 2.0).abs() < 1e-14);
        let anti = pauli_x() * c(0.0, 1.0);
        assert!(shared_feedback(&ens, &[anti]).unwrap()[0].abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ens = decompose_state(&random_density(4, 3, &mut rng), 0.0).unwrap();
        let l = random_operator(4, &mut rng);
        let rho = reconstruct_density(&ens).unwrap();
        let want = ((&l + l.adjoint()) * rho).trace().re;
        assert!((shared_feedback(&ens, &[l]).unwrap()[0] - want).abs() < 1e-12);
    }

    #[test]
    fn rank_one_step_is_linear_filter_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi = random_ket(3, &mut rng);
        let l = random_operator(3, &mut rng);
        let p = SystemParams::new(zeros(3), vec![l], 0.01, Picture::Schroedinger).unwrap();
        let ens = decompose_state(&outer(&phi), DEFAULT_RANK_TOL).unwrap();
        let pi = shared_feedback(&ens, p.couplings()).unwrap()[0];
        let next = ensemble_step(&ens, &p, 0.0, &[0.05]).unwrap();
        let want = linear_pure_step(&ens.kets[0], &p, 0.0, &[0.05 + pi * 0.01]).unwrap();
        assert!((&next.kets[0] - want).norm() < 1e-15);
        assert_eq!(next.weights, ens.weights);
    }

    #[test]
    fn scalar_channel_leaves_density_invariant() {
        let p = SystemParams::new(zeros(2), vec![identity(2) * c(0.8, 0.0)], 0.01, Picture::Schroedinger).unwrap();
        let ens = decompose_state(&diagonal(&[0.6, 0.4]), DEFAULT_RANK_TOL).unwrap();
        assert!((shared_feedback(&ens, p.couplings()).unwrap()[0] - 1.6).abs() < 1e-14);
        let next = ensemble_step(&ens, &p, 0.0, &[0.3]).unwrap();
        assert!((reconstruct_density(&next).unwrap() - diagonal(&[0.6, 0.4])).norm() < 1e-14);
    }

    #[test]
    fn checkpoint_json() {
        let ens = decompose_state(&diagonal(&[0.75, 0.25]), DEFAULT_RANK_TOL).unwrap();
        let v = ens.checkpoint();
        assert_eq!(v["weights"].as_array().unwrap().len(), 2);
        assert_eq!(v["kets"][0][0].as_array().unwrap().len(), 2);
    }
}
