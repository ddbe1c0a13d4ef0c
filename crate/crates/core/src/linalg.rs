//! Dense complex linear algebra on a finite-dimensional Hilbert space.
//!
//! Kets are column vectors and operators are square matrices over [`C64`].
//! Hermitian and density operators share the [`Operator`] representation;
//! their invariants are enforced by the checks in this module at the
//! boundaries where they matter.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex;

use crate::error::{ensure_dim, Error, Result};

pub type C64 = Complex<f64>;
pub type Ket = DVector<C64>;
pub type Operator = DMatrix<C64>;

/// Relative tolerance on `‖X − X†‖_HS` for an operator to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Default lower bound `−pos_tol` accepted for the smallest eigenvalue of a
/// density operator.
pub const DEFAULT_POS_TOL: f64 = 1e-9;
/// Accepted `|tr ρ − 1|` for a density operator.
pub const TRACE_TOL: f64 = 1e-10;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(dim: usize) -> Operator {
    Operator::identity(dim, dim)
}

pub fn zeros(dim: usize) -> Operator {
    Operator::zeros(dim, dim)
}

pub fn pauli_x() -> Operator {
    Operator::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn pauli_y() -> Operator {
    Operator::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> Operator {
    Operator::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// `diag(0, 1, …, dim−1)`.
pub fn number_operator(dim: usize) -> Operator {
    Operator::from_diagonal(&DVector::from_fn(dim, |k, _| c(k as f64, 0.0)))
}

/// Truncated annihilation operator `a|k⟩ = √k |k−1⟩`.
pub fn lowering_operator(dim: usize) -> Operator {
    Operator::from_fn(dim, dim, |r, col| {
        if col == r + 1 {
            c((col as f64).sqrt(), 0.0)
        } else {
            C64::default()
        }
    })
}

pub fn basis_ket(dim: usize, k: usize) -> Ket {
    let mut v = Ket::zeros(dim);
    v[k] = c(1.0, 0.0);
    v
}

pub fn diagonal(values: &[f64]) -> Operator {
    Operator::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&x| c(x, 0.0)),
    ))
}

/// `x ⊗ x̄`, i.e. `|x⟩⟨x|`.
pub fn outer(x: &Ket) -> Operator {
    x * x.adjoint()
}

pub fn trace(a: &Operator) -> C64 {
    a.trace()
}

pub fn trace_re(a: &Operator) -> f64 {
    a.trace().re
}

pub fn hs_norm(a: &Operator) -> f64 {
    a.norm()
}

/// `‖A − A†‖_HS`.
pub fn asymmetry(a: &Operator) -> f64 {
    (a - a.adjoint()).norm()
}

pub fn is_hermitian(a: &Operator) -> bool {
    a.is_square() && asymmetry(a) <= HERMITIAN_TOL * hs_norm(a).max(1.0)
}

pub fn ensure_hermitian(a: &Operator) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let asym = asymmetry(a);
    if asym <= HERMITIAN_TOL * hs_norm(a).max(1.0) {
        Ok(())
    } else {
        Err(Error::NotHermitian { asymmetry: asym })
    }
}

/// `(X + X†)/2`.
pub fn symmetrize(a: &Operator) -> Operator {
    (a + a.adjoint()).scale(0.5)
}

pub(crate) fn symmetrize_in_place(a: &mut Operator) {
    let d = a.nrows();
    for r in 0..d {
        a[(r, r)].im = 0.0;
        for col in (r + 1)..d {
            let v = (a[(r, col)] + a[(col, r)].conj()) * 0.5;
            a[(r, col)] = v;
            a[(col, r)] = v.conj();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketKind {
    Commutator,
    Anticommutator,
}

pub fn bracket(a: &Operator, b: &Operator, kind: BracketKind) -> Result<Operator> {
    ensure_dim(a.nrows(), b.nrows())?;
    ensure_dim(a.ncols(), b.ncols())?;
    let ab = a * b;
    let ba = b * a;
    Ok(match kind {
        BracketKind::Commutator => ab - ba,
        BracketKind::Anticommutator => ab + ba,
    })
}

/// Eigen-decomposition of a Hermitian operator with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Vec<Ket>,
}

impl Spectrum {
    /// `Σ_k λ_k v_k ⊗ v̄_k`.
    pub fn reconstruct(&self) -> Operator {
        let dim = self.vectors.first().map_or(0, |v| v.len());
        let mut out = zeros(dim);
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            out += outer(v).scale(*lambda);
        }
        out
    }

    /// Eigenvectors as the columns of a unitary matrix.
    pub fn basis(&self) -> Operator {
        Operator::from_columns(&self.vectors)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

pub fn hermitian_spectrum(a: &Operator) -> Result<Spectrum> {
    ensure_hermitian(a)?;
    Ok(spectrum_unchecked(&symmetrize(a)))
}

fn spectrum_unchecked(a: &Operator) -> Spectrum {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    Spectrum {
        values: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        vectors: order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect(),
    }
}

/// Smallest eigenvalue of the Hermitian part of `a`.
pub fn min_eigenvalue(a: &Operator) -> f64 {
    spectrum_unchecked(&symmetrize(a)).min()
}

/// Split `A = A⁺ − A⁻` into positive and negative parts.
pub fn positive_parts(a: &Operator) -> Result<(Operator, Operator)> {
    let spec = hermitian_spectrum(a)?;
    let dim = a.nrows();
    let mut plus = zeros(dim);
    let mut minus = zeros(dim);
    for (lambda, v) in spec.values.iter().zip(&spec.vectors) {
        let p = outer(v);
        if *lambda > 0.0 {
            plus += p.scale(*lambda);
        } else if *lambda < 0.0 {
            minus += p.scale(-*lambda);
        }
    }
    symmetrize_in_place(&mut plus);
    symmetrize_in_place(&mut minus);
    Ok((plus, minus))
}

/// Clip negative eigenvalues to zero and rescale to unit trace.
pub fn project_to_density(a: &Operator) -> Result<Operator> {
    let (plus, _) = positive_parts(&symmetrize(a))?;
    let tr = trace_re(&plus);
    if tr <= 0.0 {
        return Err(Error::InvalidDensity(
            "no positive spectral weight to project onto".into(),
        ));
    }
    Ok(plus.unscale(tr))
}

/// Cached spectral data of a Hamiltonian for building `e^{−iHt}` at any `t`.
#[derive(Debug, Clone)]
pub struct Propagator {
    values: Vec<f64>,
    basis: Operator,
    basis_adjoint: Operator,
}

impl Propagator {
    pub fn new(hamiltonian: &Operator) -> Result<Self> {
        let spec = hermitian_spectrum(hamiltonian)?;
        let basis = spec.basis();
        Ok(Self {
            basis_adjoint: basis.adjoint(),
            values: spec.values,
            basis,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `e^{−iHt}`.
    pub fn at(&self, t: f64) -> Operator {
        let phases = DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&l| C64::from_polar(1.0, -l * t)),
        );
        let mut scaled = self.basis.clone();
        for (mut col, ph) in scaled.column_iter_mut().zip(phases.iter()) {
            col *= *ph;
        }
        scaled * &self.basis_adjoint
    }

    /// `e^{iHt} L e^{−iHt}`.
    pub fn dress(&self, l: &Operator, t: f64) -> Result<Operator> {
        ensure_dim(self.dim(), l.nrows())?;
        ensure_dim(self.dim(), l.ncols())?;
        let u = self.at(t);
        Ok(u.adjoint() * l * u)
    }
}

/// `e^{−iHt}` via the spectral decomposition of `H`.
pub fn evolution_factor(h: &Operator, t: f64) -> Result<Operator> {
    Ok(Propagator::new(h)?.at(t))
}

/// Interaction-picture dressing `L^{Ht} = e^{iHt} L e^{−iHt}`.
pub fn dress(l: &Operator, h: &Operator, t: f64) -> Result<Operator> {
    Propagator::new(h)?.dress(l, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub operator: f64,
    pub hilbert_schmidt: f64,
    pub trace: f64,
}

pub fn norms(a: &Operator) -> Norms {
    if a.is_empty() {
        return Norms {
            operator: 0.0,
            hilbert_schmidt: 0.0,
            trace: 0.0,
        };
    }
    let sv = SVD::new(a.clone(), false, false).singular_values;
    Norms {
        operator: sv.iter().copied().fold(0.0, f64::max),
        hilbert_schmidt: a.norm(),
        trace: sv.iter().sum(),
    }
}

pub fn operator_norm(a: &Operator) -> f64 {
    norms(a).operator
}

pub fn trace_norm(a: &Operator) -> f64 {
    norms(a).trace
}

/// `‖L‖ = Σ_j ‖L_j‖` over measurement channels.
pub fn coupling_norm(ls: &[Operator]) -> f64 {
    ls.iter().map(operator_norm).sum()
}

/// Checks Hermiticity, `λ_min ≥ −pos_tol` and `|tr ρ − 1| ≤ TRACE_TOL`.
pub fn check_density(rho: &Operator, pos_tol: f64) -> Result<()> {
    ensure_hermitian(rho)?;
    let tr = trace(rho);
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(Error::InvalidDensity(format!("trace {} != 1", tr.re)));
    }
    let lmin = min_eigenvalue(rho);
    if lmin < -pos_tol {
        return Err(Error::InvalidDensity(format!(
            "negative eigenvalue {lmin:.3e}"
        )));
    }
    Ok(())
}

pub fn check_finite(a: &Operator) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ket_norm_sq(x: &Ket) -> f64 {
    x.norm_squared()
}

/// `(x, A x)` with the inner product antilinear in the first slot.
pub fn inner_form(x: &Ket, a: &Operator) -> C64 {
    x.dotc(&(a * x))
}
