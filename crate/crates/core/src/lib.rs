//! Cumulant semigroups of two-type continuous-state branching processes in
//! varying environments.
//!
//! The crate solves the backward integral equations that define the
//! cumulant semigroup `v_{r,t}(lambda)`, computes first moments, and checks
//! both against exact simulation of finite-activity models.

pub mod config;
pub mod environment;
pub mod error;
pub mod grid;
pub mod jump;
pub mod linalg;
pub mod measure;
pub mod mechanism;
pub mod moments;
pub mod simulator;
pub mod solver;
pub mod verify;

pub use environment::{build_phi_n, special_to_general, Environment, SpecialForm, Species, ValidationReport};
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use jump::{DiscreteSpatialMeasure, JumpMeasure, SpatialPoint};
pub use measure::{EndpointRule, StieltjesMeasure};
