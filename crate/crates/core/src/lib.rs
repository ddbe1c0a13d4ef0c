//! Simulation and property-testing toolkit for diffusive quantum filtering
//! and stochastic master equations on finite-dimensional Hilbert spaces.
//!
//! Operators are dense complex matrices ([`Operator`]); every stepper is an
//! Euler–Maruyama update with left-point evaluation, and every Monte Carlo
//! aggregate is folded in trajectory order so results do not depend on the
//! number of worker threads.

pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod master;
pub mod meanfield;
pub mod montecarlo;
pub mod noise;
pub mod pure;
pub mod random;
pub mod system;
pub mod validation;

pub use error::{Error, Result};
pub use linalg::{Ket, Operator, C64};
pub use noise::{Driver, ItoPath, WienerPath};
pub use system::{Picture, SystemParams};
