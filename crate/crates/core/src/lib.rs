//! Lattice Boltzmann solver with a race-free parallel push kernel.
//!
//! The fused step rebuilds post-collision populations from stored moments
//! and pushes them straight into their destination slots, so one
//! distribution buffer is enough and every slot has a single writer.

pub mod analysis;
pub mod bench;
pub mod boundary;
pub mod cases;
pub mod collision;
pub mod config;
pub mod error;
pub mod fields;
pub mod io;
pub mod lattice;
pub mod multicomponent;
pub mod real;
pub mod reference;
mod scatter;
pub mod solver;

pub use boundary::{BoundarySpec, FaceKind};
pub use collision::{CollisionParams, Relaxation};
pub use error::{Error, Result};
pub use fields::{Dims, FieldSet, NodeFlags};
pub use lattice::{make_descriptor, LatticeDescriptor, LatticeKind};
pub use multicomponent::{ColorParams, PerturbationForm, TwoFluidSolver};
pub use real::{Precision, Real};
pub use reference::ReferenceSolver;
pub use scatter::WriteAudit;
pub use solver::{BodyForce, Macroscopic, Solver};
