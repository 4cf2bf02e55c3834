//! A numerical laboratory for two-phase free transmission energies.

pub mod config;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod geometry;
pub mod grid;
pub mod laplacian;
pub mod oracle1d;
mod polish;
pub mod problem;
pub mod regularity;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
pub use expr::SpatialFn;
pub use grid::{Grid, Point, ScalarField};
pub use problem::{assemble_energy, phase_of, CoefficientPair, EnergyBreakdown, Phase, ProblemSpec};
