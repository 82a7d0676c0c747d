//! Numerical toolkit for the family of rank-two Poisson structures
//! `J_ij = η(x)·φ_i(x_i)·φ_j(x_j)·(ψ_i(x_i) − ψ_j(x_j))`.
//!
//! - [`family`]: specs, structure matrices
//! - [`verify`]: Jacobi residuals, rank, Casimir annihilation
//! - [`casimir`], [`darboux`]: Casimir sets and the global Darboux chart
//! - [`dynamics`]: full and reduced integration
//! - [`catalog`]: the example systems

pub mod casimir;
pub mod catalog;
pub mod darboux;
pub mod dynamics;
pub mod error;
pub mod expr;
mod expr_parse;
pub mod family;
pub mod fd;
pub mod halton;
pub mod interval;
pub mod ode;
pub mod primitive;
pub mod verify;

pub use casimir::{CasimirSet, Independence};
pub use darboux::DarbouxChart;
pub use dynamics::{
    integrate, integrate_reduced, reduced_consistency, FieldSource, IntegrationOptions, PoissonSystem,
    ReducedConsistency, TrajectoryRecord,
};
pub use error::{Error, Result};
pub use expr::{CustomFn, Expr};
pub use family::{AxisSpec, PoissonFamilySpec, StructureMatrixValue};
pub use halton::{sample_box, Halton};
pub use interval::{Interval, IntervalBox};
pub use ode::{SolverOptions, StepStats};
pub use verify::{
    annihilation_defect, bracket, jacobi_residual, jacobi_sweep, rank_at, rank_histogram, Defect, JacobiResidual,
    StructureField, SweepSummary,
};
