//! Backend capability interface.

mod clarabel;
mod highs;

pub use self::clarabel::ClarabelBackend;
pub use self::highs::HighsBackend;

use crate::error::{EngineError, Result};
use crate::program::{ColId, LinearRow, Program};
use crate::SolveOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Capabilities {
    pub milp: bool,
    pub native_soc: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendStatus {
    Optimal,
    /// A primal point exists but optimality was not proven (time limit).
    Feasible,
    Infeasible,
    Unbounded,
    Failed,
}

#[derive(Clone, Debug)]
pub struct BackendOutcome {
    pub status: BackendStatus,
    pub values: Vec<f64>,
    /// Objective as reported by the backend, offset excluded.
    pub objective: f64,
    /// Best proven lower bound, offset excluded.
    pub bound: f64,
}

/// How a program is handed to a backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpenMode {
    pub relax_integrality: bool,
    pub include_cones: bool,
}

/// A loaded program that can be extended with rows and re-solved.
pub trait Session {
    fn add_rows(&mut self, rows: &[LinearRow]) -> Result<()>;
    fn set_column_bounds(&mut self, col: ColId, lower: f64, upper: f64) -> Result<()>;
    fn solve(&mut self, time_limit_s: Option<f64>) -> Result<BackendOutcome>;
}

pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn capabilities(&self) -> Capabilities;
    fn open(
        &self,
        program: &Program,
        mode: OpenMode,
        options: &SolveOptions,
    ) -> Result<Box<dyn Session>>;
}

/// Looks a backend up by its configuration name.
pub fn backend_by_name(name: &str) -> Result<Box<dyn SolverBackend>> {
    match name.trim().to_ascii_lowercase().as_str() {
        "highs" | "highs-oa" => Ok(Box::new(HighsBackend)),
        "clarabel" => Ok(Box::new(ClarabelBackend)),
        other => Err(EngineError::UnknownBackend(other.to_string())),
    }
}
