//! System parameters shared by every stepper: Hamiltonian, measurement
//! couplings, step size and the picture the state is propagated in.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{ensure_hermitian, operator_norm, symmetrize, Ket, Operator, Propagator, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Picture {
    Schroedinger,
    /// State carried as `e^{iHt} γ e^{−iHt}` with dressed couplings; the
    /// Hamiltonian term is absorbed into exact unitary factors.
    Interaction,
}

impl Picture {
    /// Interaction picture once `‖H‖·dt > 0.1`.
    pub fn auto(hamiltonian: &Operator, dt: f64) -> Self {
        if operator_norm(hamiltonian) * dt > 0.1 {
            Picture::Interaction
        } else {
            Picture::Schroedinger
        }
    }
}

/// Operators entering one step, expressed in the propagation frame.
#[derive(Debug, Clone)]
pub struct Frame {
    /// `None` when the Hamiltonian has been absorbed by the interaction picture.
    pub hamiltonian: Option<Operator>,
    pub couplings: Vec<Operator>,
    pub couplings_adj: Vec<Operator>,
    /// `½ Σ_j L_j* L_j`.
    pub damping: Operator,
}

impl Frame {
    fn new(hamiltonian: Option<Operator>, couplings: Vec<Operator>) -> Self {
        let dim = couplings[0].nrows();
        let couplings_adj: Vec<Operator> = couplings.iter().map(|l| l.adjoint()).collect();
        let mut damping = Operator::zeros(dim, dim);
        for (l, ld) in couplings.iter().zip(&couplings_adj) {
            damping += ld * l;
        }
        let damping = symmetrize(&damping).scale(0.5);
        Self {
            hamiltonian,
            couplings,
            couplings_adj,
            damping,
        }
    }

    pub fn dim(&self) -> usize {
        self.damping.nrows()
    }

    pub fn channels(&self) -> usize {
        self.couplings.len()
    }

    /// `−iH − ½ Σ L*L`, the drift generator of the linear pure-state filter.
    pub fn linear_generator(&self) -> Operator {
        let mut g = -&self.damping;
        if let Some(h) = &self.hamiltonian {
            g -= h * C64::new(0.0, 1.0);
        }
        g
    }
}

#[derive(Debug, Clone)]
pub struct SystemParams {
    hamiltonian: Operator,
    couplings: Vec<Operator>,
    dt: f64,
    picture: Picture,
    propagator: Option<Propagator>,
    lab_frame: Frame,
}

pub type PureFilterParams = SystemParams;
pub type SmeParams = SystemParams;

impl SystemParams {
    pub fn new(
        hamiltonian: Operator,
        couplings: Vec<Operator>,
        dt: f64,
        picture: Picture,
    ) -> Result<Self> {
        ensure_hermitian(&hamiltonian)?;
        if couplings.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one measurement channel is required".into(),
            ));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let dim = hamiltonian.nrows();
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        for l in &couplings {
            ensure_dim(dim, l.nrows())?;
            ensure_dim(dim, l.ncols())?;
        }
        let hamiltonian = symmetrize(&hamiltonian);
        let propagator = match picture {
            Picture::Interaction => Some(Propagator::new(&hamiltonian)?),
            Picture::Schroedinger => None,
        };
        let lab_frame = Frame::new(Some(hamiltonian.clone()), couplings.clone());
        Ok(Self {
            hamiltonian,
            couplings,
            dt,
            picture,
            propagator,
            lab_frame,
        })
    }

    /// Picks the picture with [`Picture::auto`].
    pub fn with_auto_picture(hamiltonian: Operator, couplings: Vec<Operator>, dt: f64) -> Result<Self> {
        let picture = Picture::auto(&hamiltonian, dt);
        Self::new(hamiltonian, couplings, dt, picture)
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(self.hamiltonian.clone(), self.couplings.clone(), dt, self.picture)
    }

    pub fn with_picture(&self, picture: Picture) -> Result<Self> {
        Self::new(self.hamiltonian.clone(), self.couplings.clone(), self.dt, picture)
    }

    pub fn with_hamiltonian(&self, hamiltonian: Operator) -> Result<Self> {
        Self::new(hamiltonian, self.couplings.clone(), self.dt, self.picture)
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn couplings(&self) -> &[Operator] {
        &self.couplings
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn picture(&self) -> Picture {
        self.picture
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn channels(&self) -> usize {
        self.couplings.len()
    }

    /// Operators for a step starting at time `t`.
    pub fn frame(&self, t: f64) -> Cow<'_, Frame> {
        match &self.propagator {
            None => Cow::Borrowed(&self.lab_frame),
            Some(p) => {
                let u = p.at(t);
                let ud = u.adjoint();
                let ls = self.couplings.iter().map(|l| &ud * l * &u).collect();
                Cow::Owned(Frame::new(None, ls))
            }
        }
    }

    /// Like [`frame`](Self::frame) with an additional lab-frame Hamiltonian
    /// term (dressed in the interaction picture).
    pub fn frame_with(&self, t: f64, extra: &Operator) -> Result<Cow<'_, Frame>> {
        ensure_dim(self.dim(), extra.nrows())?;
        ensure_dim(self.dim(), extra.ncols())?;
        Ok(match &self.propagator {
            None => {
                let mut f = self.lab_frame.clone();
                f.hamiltonian = Some(symmetrize(&(&self.hamiltonian + extra)));
                Cow::Owned(f)
            }
            Some(p) => {
                let u = p.at(t);
                let ud = u.adjoint();
                let ls = self.couplings.iter().map(|l| &ud * l * &u).collect();
                let h = symmetrize(&(&ud * extra * &u));
                Cow::Owned(Frame::new(Some(h), ls))
            }
        })
    }

    /// Maps a propagated operator at time `t` back to the Schrödinger picture.
    pub fn to_lab(&self, state: &Operator, t: f64) -> Operator {
        match &self.propagator {
            None => state.clone(),
            Some(p) => {
                let u = p.at(t);
                &u * state * u.adjoint()
            }
        }
    }

    pub fn from_lab(&self, state: &Operator, t: f64) -> Operator {
        match &self.propagator {
            None => state.clone(),
            Some(p) => {
                let u = p.at(t);
                u.adjoint() * state * &u
            }
        }
    }

    pub fn ket_to_lab(&self, state: &Ket, t: f64) -> Ket {
        match &self.propagator {
            None => state.clone(),
            Some(p) => p.at(t) * state,
        }
    }

    pub fn ket_from_lab(&self, state: &Ket, t: f64) -> Ket {
        match &self.propagator {
            None => state.clone(),
            Some(p) => p.at(t).adjoint() * state,
        }
    }

    /// Schrödinger-picture operators regardless of the propagation picture.
    pub fn lab_frame(&self) -> &Frame {
        &self.lab_frame
    }

    pub(crate) fn check_increment(&self, incr: &[f64]) -> Result<()> {
        ensure_dim(self.channels(), incr.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, pauli_x, pauli_z, c};

    #[test]
    fn auto_picture_threshold() {
        let h = pauli_z();
        assert_eq!(Picture::auto(&h, 0.05), Picture::Schroedinger);
        assert_eq!(Picture::auto(&h, 0.2), Picture::Interaction);
    }

    #[test]
    fn validation() {
        assert!(SystemParams::new(pauli_z(), vec![], 0.1, Picture::Schroedinger).is_err());
        assert!(SystemParams::new(pauli_z(), vec![identity(3)], 0.1, Picture::Schroedinger).is_err());
        assert!(SystemParams::new(pauli_z(), vec![pauli_x()], 0.0, Picture::Schroedinger).is_err());
        let nh = pauli_x() * c(0.0, 1.0);
        assert!(SystemParams::new(nh, vec![pauli_x()], 0.1, Picture::Schroedinger).is_err());
    }

    #[test]
    fn frames_agree_at_time_zero() {
        let p = SystemParams::new(pauli_z(), vec![pauli_x()], 0.1, Picture::Interaction).unwrap();
        let f = p.frame(0.0);
        assert!(f.hamiltonian.is_none());
        assert!((&f.couplings[0] - pauli_x()).norm() < 1e-14);
        let g = p.to_lab(&pauli_x(), 0.0);
        assert!((g - pauli_x()).norm() < 1e-14);
    }
}
