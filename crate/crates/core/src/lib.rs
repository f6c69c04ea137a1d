//! Forward model of high-gain parametric down-conversion in an aperiodically
//! poled MgO:LiNbO₃ crystal: dispersion, grating, Bogolyubov coefficients and
//! the observables built on them (spectra, photon-number covariance, gain
//! curves, sum-frequency cross-correlation).

pub mod bogolyubov;
pub mod dispersion;
pub mod error;
pub mod gainfit;
pub mod grating;
pub mod observables;

pub use bogolyubov::{
    solve_detunings, solve_grid, solve_one, Amplitudes, BogoliubovField, CouplingSpec, Crystal,
    DetuningGrid, IntegrationOptions, Integrator, SolverConfig, Tolerance,
};
pub use dispersion::{DispersionModel, InteractionFrequencies};
pub use error::{Error, Result};
pub use grating::{GratingKind, GratingProfile};
