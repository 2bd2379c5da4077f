//! Model-based active learning of turbulent flow fields with a simulated mobile sensor.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the CLI uses.

pub mod ensemble;
pub mod error;
pub mod field;
pub mod flowsim;
pub mod geometry;
pub mod gp;
pub mod linalg;
pub mod orchestrator;
pub mod planner;
pub mod rig;
pub mod scalar;
pub mod sigproc;

pub use error::{Error, Result};
pub use field::{FlowField, Property, ScalarField};
pub use scalar::Real;

pub type Point = geometry::Point2<f64>;
pub type Domain = geometry::Domain2D<f64>;
pub type GroundTruth = flowsim::FlowGroundTruth<f64>;
