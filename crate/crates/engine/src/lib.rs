//! Mixed-integer rotated-cone solving behind a minimal backend interface.
//!
//! [`Program`] is the solver-agnostic image; [`Engine`] dispatches it to a
//! [`SolverBackend`], enforcing cones natively when the backend can and with
//! an outer-approximation cut loop otherwise.

pub mod backend;
pub mod cuts;
mod engine;
mod error;
pub mod program;

pub use backend::{backend_by_name, Capabilities, ClarabelBackend, HighsBackend, SolverBackend};
pub use cuts::{cone_violations, generate_cuts, ConeCut, ConeViolation, CutPool, CutRecord};
pub use engine::{Engine, Solution, SolveOptions, SolveStatus};
pub use error::{EngineError, Result};
pub use program::{ColId, Column, ConePoint, LinearRow, Program, RotatedCone, RowTag};
