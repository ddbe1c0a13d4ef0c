use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::linalg::{ensure_hermitian, Operator, C64};
use crate::random::{random_hermitian, random_operator};

pub const RELATIVE_SLACK: f64 = 1e-10;

/// Both sides of the three trace inequalities for Hermitian `A`:
/// `2|tr(ABAB*)| ≤ tr[A²(BB*+B*B)]`, `|tr(ABAB + AB*AB*)| ≤ tr[A²(BB*+B*B)]`
/// and, for the Hermitian part `B_h` of `B`, `|tr(AB_hAB_h)| ≤ tr(A²B_h²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityResult {
    pub lhs1: f64,
    pub rhs1: f64,
    pub lhs2: f64,
    pub rhs2: f64,
    pub lhs3: f64,
    pub rhs3: f64,
    pub pass: bool,
}

impl InequalityResult {
    /// Largest `lhs / rhs` (0 when both sides vanish).
    pub fn worst_ratio(&self) -> f64 {
        [(self.lhs1, self.rhs1), (self.lhs2, self.rhs2), (self.lhs3, self.rhs3)]
            .iter()
            .map(|(l, r)| if *r > 0.0 { l / r } else if *l > 0.0 { f64::INFINITY } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

/// `tr(XY)` without forming the product.
fn tr_prod(x: &Operator, y: &Operator) -> C64 {
    let d = x.nrows();
    let mut s = C64::default();
    for r in 0..d {
        for k in 0..d {
            s += x[(r, k)] * y[(k, r)];
        }
    }
    s
}

fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + RELATIVE_SLACK * rhs.abs().max(lhs.abs())
}

pub fn trace_inequality_check(a: &Operator, b: &Operator) -> Result<InequalityResult> {
    ensure_hermitian(a)?;
    crate::error::ensure_dim(a.nrows(), b.nrows())?;
    let bd = b.adjoint();
    let a2 = a * a;
    let ab = a * b;
    let abd = a * &bd;
    let rhs = tr_prod(&a2, &(b * &bd + &bd * b)).re;
    let lhs1 = 2.0 * tr_prod(&ab, &abd).norm();
    let lhs2 = (tr_prod(&ab, &ab) + tr_prod(&abd, &abd)).norm();
    let bh = (b + &bd) * C64::from(0.5);
    let abh = a * &bh;
    let lhs3 = tr_prod(&abh, &abh).norm();
    let rhs3 = tr_prod(&a2, &(&bh * &bh)).re;
    Ok(InequalityResult {
        lhs1,
        rhs1: rhs,
        lhs2,
        rhs2: rhs,
        lhs3,
        rhs3,
        pass: holds(lhs1, rhs) && holds(lhs2, rhs) && holds(lhs3, rhs3),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalitySweep {
    pub dim: usize,
    pub draws: usize,
    pub failures: usize,
    pub worst_ratio: f64,
}

/// Random Hermitian `A` and general `B` with Gaussian entries.
pub fn inequality_sweep(dim: usize, draws: usize, seed: u64) -> Result<InequalitySweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let a = random_hermitian(dim, &mut rng);
        let b = random_operator(dim, &mut rng);
        let r = trace_inequality_check(&a, &b)?;
        failures += usize::from(!r.pass);
        worst = worst.max(r.worst_ratio());
    }
    Ok(InequalitySweep { dim, draws, failures, worst_ratio: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, pauli_x, pauli_z};

    #[test]
    fn pauli_equality_case() {
        let r = trace_inequality_check(&pauli_z(), &pauli_x()).unwrap();
        let zxzx = pauli_z() * pauli_x() * pauli_z() * pauli_x();
        assert!((r.lhs1 - 2.0 * zxzx.trace().norm()).abs() < 1e-14);
        assert!((r.lhs1 - 4.0).abs() < 1e-14 && (r.rhs1 - 4.0).abs() < 1e-14);
        assert!(r.pass);
    }

    #[test]
    fn identity_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_operator(2, &mut rng);
        let r = trace_inequality_check(&identity(2), &b).unwrap();
        let bbd = (&b * b.adjoint()).trace().re;
        assert!((r.lhs1 - 2.0 * bbd).abs() < 1e-12);
        assert!((r.rhs1 - 2.0 * bbd).abs() < 1e-12);
    }

    #[test]
    fn sweep_small() {
        let s = inequality_sweep(4, 500, 7).unwrap();
        assert_eq!(s.failures, 0);
        assert!(s.worst_ratio <= 1.0 + 1e-10);
    }
}
