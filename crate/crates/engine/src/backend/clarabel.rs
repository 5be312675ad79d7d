//! Clarabel interior-point backend: native second-order cones, continuous
//! programs only. Integer columns are accepted when already fixed.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{BackendOutcome, BackendStatus, Capabilities, OpenMode, Session, SolverBackend};
use crate::error::{EngineError, Result};
use crate::program::{ColId, Column, LinearRow, Program, RotatedCone};
use crate::SolveOptions;

const NAME: &str = "clarabel";
const INF: f64 = 1e20;

#[derive(Clone, Copy, Debug, Default)]
pub struct ClarabelBackend;

impl SolverBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        NAME
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            milp: false,
            native_soc: true,
        }
    }

    fn open(
        &self,
        program: &Program,
        mode: OpenMode,
        _options: &SolveOptions,
    ) -> Result<Box<dyn Session>> {
        let free_integers = program
            .columns
            .iter()
            .filter(|c| c.integer && c.lower != c.upper)
            .count();
        if free_integers > 0 && !mode.relax_integrality {
            return Err(EngineError::Unsupported {
                backend: NAME,
                reason: format!("{free_integers} unfixed integer columns"),
            });
        }
        Ok(Box::new(ClarabelSession {
            columns: program.columns.clone(),
            rows: program.rows.clone(),
            cones: if mode.include_cones {
                program.cones.clone()
            } else {
                Vec::new()
            },
        }))
    }
}

struct ClarabelSession {
    columns: Vec<Column>,
    rows: Vec<LinearRow>,
    cones: Vec<RotatedCone>,
}

/// Triplet accumulator for `A x + s = b`.
#[derive(Default)]
struct Block {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Block {
    fn push(&mut self, terms: impl IntoIterator<Item = (ColId, f64)>, rhs: f64) {
        let r = self.b.len();
        for (j, a) in terms {
            self.i.push(r);
            self.j.push(j);
            self.v.push(a);
        }
        self.b.push(rhs);
    }
}

impl ClarabelSession {
    fn assemble(&self) -> (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) {
        let mut zero = Block::default();
        let mut nonneg = Block::default();
        let mut soc = Block::default();

        for (j, c) in self.columns.iter().enumerate() {
            if c.lower == c.upper {
                zero.push([(j, 1.0)], c.lower);
                continue;
            }
            if c.lower > -INF {
                nonneg.push([(j, -1.0)], -c.lower);
            }
            if c.upper < INF {
                nonneg.push([(j, 1.0)], c.upper);
            }
        }
        for row in &self.rows {
            if row.is_equality() {
                zero.push(row.terms.iter().copied(), row.lower);
                continue;
            }
            if row.lower > -INF {
                nonneg.push(row.terms.iter().map(|&(j, a)| (j, -a)), -row.lower);
            }
            if row.upper < INF {
                nonneg.push(row.terms.iter().copied(), row.upper);
            }
        }
        // (i + v, 2p, 2q, i − v) in SOC(4)
        for cone in &self.cones {
            soc.push([(cone.current, -1.0), (cone.voltage, -1.0)], 0.0);
            soc.push([(cone.p, -2.0)], 0.0);
            soc.push([(cone.q, -2.0)], 0.0);
            soc.push([(cone.current, -1.0), (cone.voltage, 1.0)], 0.0);
        }

        let n = self.columns.len();
        let mut rows_i = Vec::new();
        let mut cols_j = Vec::new();
        let mut vals = Vec::new();
        let mut rhs = Vec::new();
        let mut offset = 0;
        for block in [&zero, &nonneg, &soc] {
            rows_i.extend(block.i.iter().map(|r| r + offset));
            cols_j.extend_from_slice(&block.j);
            vals.extend_from_slice(&block.v);
            rhs.extend_from_slice(&block.b);
            offset += block.b.len();
        }
        let mut cones = Vec::new();
        if !zero.b.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(zero.b.len()));
        }
        if !nonneg.b.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(nonneg.b.len()));
        }
        cones.extend(self.cones.iter().map(|_| SupportedConeT::SecondOrderConeT(4)));
        let a = CscMatrix::new_from_triplets(offset, n, rows_i, cols_j, vals);
        (a, rhs, cones)
    }
}

impl Session for ClarabelSession {
    fn add_rows(&mut self, rows: &[LinearRow]) -> Result<()> {
        self.rows.extend_from_slice(rows);
        Ok(())
    }

    fn set_column_bounds(&mut self, col: ColId, lower: f64, upper: f64) -> Result<()> {
        self.columns[col].lower = lower;
        self.columns[col].upper = upper;
        Ok(())
    }

    fn solve(&mut self, time_limit_s: Option<f64>) -> Result<BackendOutcome> {
        let n = self.columns.len();
        let (a, b, cones) = self.assemble();
        let p = CscMatrix::<f64>::zeros((n, n));
        let q: Vec<f64> = self.columns.iter().map(|c| c.cost).collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(400)
            .time_limit(time_limit_s.unwrap_or(f64::INFINITY))
            .tol_gap_abs(1e-9)
            .tol_gap_rel(1e-9)
            .tol_feas(1e-9)
            .build()
            .map_err(|e| EngineError::Backend {
                backend: NAME,
                message: format!("settings: {e:?}"),
            })?;
        let mut solver =
            DefaultSolver::new(&p, &q, &a, &b, &cones, settings).map_err(|e| {
                EngineError::Backend {
                    backend: NAME,
                    message: format!("setup: {e}"),
                }
            })?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => BackendStatus::Optimal,
            SolverStatus::AlmostSolved => BackendStatus::Feasible,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                BackendStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                BackendStatus::Unbounded
            }
            other => {
                log::warn!("Clarabel ended with status {other:?}");
                BackendStatus::Failed
            }
        };
        Ok(BackendOutcome {
            status,
            values: sol.x.clone(),
            objective: sol.obj_val,
            bound: sol.obj_val_dual,
        })
    }
}
