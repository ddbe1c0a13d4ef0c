//! Random operators and states for property checks and validation runs.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, outer, symmetrize, trace_re, Ket, Operator, C64};

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_operator<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    Operator::from_fn(dim, dim, |_, _| complex_gaussian(rng))
}

/// GUE-like Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    symmetrize(&random_operator(dim, rng))
}

pub fn random_ket<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Ket {
    let v = Ket::from_fn(dim, |_, _| complex_gaussian(rng));
    let n = v.norm();
    v.unscale(n)
}

/// Random density operator of the given rank (`G G† / tr`, `G` of shape `dim × rank`).
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Operator {
    let rank = rank.clamp(1, dim);
    let mut rho = Operator::zeros(dim, dim);
    for _ in 0..rank {
        let v = Ket::from_fn(dim, |_, _| complex_gaussian(rng));
        rho += outer(&v);
    }
    let rho = symmetrize(&rho);
    let tr = trace_re(&rho);
    rho.unscale(tr)
}

/// Rescales `a` to unit operator norm.
pub fn normalized_operator(a: Operator) -> Operator {
    let n = crate::linalg::operator_norm(&a);
    if n == 0.0 {
        a
    } else {
        a.unscale(n)
    }
}
