//! Semi-Lagrangian solver for the BGK model of rarefied gas dynamics in one
//! space and three velocity dimensions.
//!
//! The scheme traces characteristics backwards, reconstructs the distribution
//! at the foot points with either a piecewise-linear spline or a constrained
//! moving-least-squares fit, and relaxes implicitly towards a Maxwellian that
//! shares the reconstructed moments. The Maxwellian is either the sampled
//! continuous one or the discrete exponential-family one whose grid moments
//! are exact. Walls reflect diffusely.
//!
//! [`experiment`] wires everything into the Sod shock-tube presets and
//! [`riemann`] provides the exact Euler solution used as the fluid-limit
//! reference.

pub mod config;
pub mod dmaxwell;
pub mod error;
pub mod experiment;
pub mod gas;
pub mod grid;
pub mod interp;
pub mod moments;
pub mod riemann;
pub mod solver;

pub use error::{Error, Result};
pub use gas::GasConstants;
pub use grid::{PhysicalGrid, VelocityGrid};
pub use moments::{DistributionField, MacroState, Moments};
pub use solver::{MaxwellianMode, Reconstruction, Solver, SolverConfig, StepState, TauMode, WallSide, WallSpec};
