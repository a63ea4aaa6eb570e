//! Exact solutions, initial data, error measures and the convergence study.

pub mod barenblatt;
pub mod cross;
pub mod equilibrium;
pub mod initial;
pub mod metrics;
pub mod study;

pub use barenblatt::BarenblattSpec;
pub use cross::{cross_initializer, CrossShape};
pub use equilibrium::{equilibrium_profile, EquilibriumProfile};
pub use initial::{build_initial_data, InitialData, RadialMap};
pub use metrics::{convergence_rates, flow_error, relative_internal_energy};
pub use study::{convergence_study, run_barenblatt, BarenblattOutcome, BarenblattRun, Preset, RateRow, RateTable};

use thiserror::Error;

use crate::dual::SolverError;
use crate::dynamics::DynamicsError;
use crate::geometry::GeometryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("reference density is negative on cell {0}")]
    NonpositiveDensity(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
