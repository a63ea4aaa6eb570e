//! Particle discretization of porous-medium-type Wasserstein gradient flows
//! on Laguerre tessellations.
//!
//! Particles carry fixed masses; at each time the optimal (possibly
//! ball-clipped) Laguerre tessellation is found by maximizing a concave dual
//! in the weights, and particles relax exponentially toward their cell
//! barycenters.

pub mod analysis;
pub mod dual;
pub mod dynamics;
pub mod energy;
pub mod geometry;
pub mod linalg;

pub use dual::{primal_energy, solve_weights, ParticleSystem, SolverError, SolverOptions, SolverState};
pub use dynamics::{simulate, DynamicsError, SimulationSettings, TrajectoryRecord};
pub use energy::{EnergyError, EnergyModel, InternalEnergy, Potential, PowerLaw};
pub use geometry::{build_tessellation, Domain, GeometryError, Mode, Point, Tessellation};
