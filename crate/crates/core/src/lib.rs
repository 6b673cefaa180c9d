//! Magnetic geodesic flows on closed surfaces.
//!
//! The crate integrates `∇_γ̇ γ̇ = f(γ)·ıγ̇` on the round sphere, flat and
//! conformal tori and the hyperbolic plane, finds periodic orbits at a fixed
//! energy by shooting and by descent of a discrete free-period action,
//! minimizes the Taimanov functional, and evaluates critical values and
//! contact-type certificates on the unit tangent bundle.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contact;
pub mod critical;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod io;
pub mod magnetic;
pub mod numerics;
pub mod orbitfind;
pub mod taimanov;

pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::{ChartPoint, MetricData, SurfaceKind, SurfaceModel, Vec2};
pub use magnetic::{MagneticField, MagneticSystem};
