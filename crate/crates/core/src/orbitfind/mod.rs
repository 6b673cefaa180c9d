//! Closed magnetic geodesics: closed-form oracles, shooting and the
//! variational search over discrete loops.

pub mod action;
pub mod descent;
pub mod oracle;
pub mod shooting;

pub use action::{
    discrete_action, discrete_action_gradient, discrete_action_gradient_with, discrete_action_with, loop_flux, write_loop_csv,
    ActionGradient, DiscreteLoop, FluxModel,
};
pub use descent::{descend_to_critical, loop_to_orbit, DescentParams, DescentResult, DescentStatus};
pub use oracle::{homogeneous_oracle, oracle_circle, HomogeneousKind, OracleAnswer, OracleCircle};
pub use shooting::{fit_circle, orbit_radius, section_through, shoot_periodic, shoot_periodic_multiple, Homotopy, Orbit, ShootingParams};
