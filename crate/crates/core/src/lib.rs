//! Solver and closed-form oracles for stationary optimal control problems
//! with optimal switching between AK production regimes.
//!
//! The crate is organised around four layers:
//!
//! * [`problem`]: regimes, preferences, switching costs and their validation.
//! * [`analytic`]: exact value functions, thresholds and equilibrium paths for
//!   the AK economy with two or three regimes and costless switching.
//! * [`solver`]: a monotone upwind discretization of the HJB quasi-variational
//!   inequality system, solved by alternating Gauss-Seidel policy sweeps.
//! * [`simulate`]: forward integration of the controlled economy under either
//!   kind of policy, with discounted-utility bookkeeping and consistency checks.

pub mod analytic;
pub mod error;
pub mod ext;
pub mod problem;
pub mod regions;
pub mod simulate;
pub mod solver;

pub use error::{QviError, Result};
pub use ext::ExtValue;
pub use problem::{AkRegime, Preferences, StationaryProblem, SwitchingCostMatrix};
