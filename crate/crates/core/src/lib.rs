//! Structure-preserving finite-difference scheme for the one-dimensional
//! Kobayashi-Warren-Carter grain-boundary system.
//!
//! The orientation order `eta` and angle `theta` on `(0, 1)` with
//! homogeneous Neumann conditions are advanced by a linear implicit update of
//! `eta` followed by a nonlinear implicit update of `theta`. The scheme keeps
//! `0 <= eta <= 1`, keeps `|theta|` below its initial maximum, and never
//! increases the discrete energy; [`stepper`] checks all three at runtime.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod grid;
pub mod identities;
pub mod linalg;
pub mod model;
pub mod presets;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{Field, GridSpec};
pub use model::{Mobility, ModelParams, StabilityBounds};
pub use presets::Preset;
pub use stepper::{
    RunBounds, Scheme, SimState, Simulation, SolverStats, StepReport, ThetaMethod, ThetaSolveConfig,
};
