//! Density-based topology optimization by tracing a barrier homotopy.
//!
//! The compliance of a linearly elastic body is minimized over a per-vertex
//! density `0 ≤ ρ ≤ 1` with a volume penalty and a Ginzburg-Landau
//! regularization. The box constraints are handled by a primal-dual
//! logarithmic barrier whose parameter is driven to its target along a
//! global homotopy, and each continuation step is corrected by Newton's
//! method on the full KKT system.

pub mod barrier;
pub mod cli;
pub mod config;
pub mod demos;
pub mod derivatives;
pub mod fem;
pub mod history;
pub mod homotopy;
pub mod lagrangian;
pub mod mesh;
pub mod solver;
pub mod sparse;
pub mod vtk;

pub use config::{parse_config, parse_config_str, SolverConfig};
pub use homotopy::{SolveTrace, TraceRecord};
pub use lagrangian::Lagrangian;
pub use solver::{run, solve, KktPoint, SolveOutcome};
