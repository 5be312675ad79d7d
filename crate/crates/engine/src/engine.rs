//! Solve driver.
//!
//! Programs without cones, or continuous programs on a native-cone backend,
//! go to the backend in a single call. Everything else runs the
//! outer-approximation loop:
//!
//! 1. optional LP warm-up rounds on the continuous relaxation, collecting cuts;
//! 2. master MILP over the linear rows plus all cuts so far;
//! 3. for each master point, a fixed-integer LP polished with further cut
//!    rounds until the cones hold to `cone_tol` (upper bound);
//! 4. stop when the master point is itself cone-feasible or the gap between
//!    the master bound and the best polished point closes.
//!
//! A master point that is cone-feasible within tolerance is near-optimal for
//! the mixed-integer cone program, since the cut polyhedron contains the cone.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{
    backend_by_name, BackendOutcome, BackendStatus, HighsBackend, OpenMode, Session,
    SolverBackend,
};
use crate::cuts::{cone_violations, generate_cuts, CutPool, CutRecord};
use crate::error::{EngineError, Result};
use crate::program::{LinearRow, Program};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveOptions {
    pub mip_gap: f64,
    pub time_limit_s: Option<f64>,
    pub cone_tol: f64,
    pub max_oa_iters: usize,
    /// Cut rounds on the continuous relaxation before the first MILP.
    pub lp_warmup_rounds: usize,
    /// Keep every generated cut with the point it separated.
    pub record_cuts: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            mip_gap: 1e-4,
            time_limit_s: None,
            cone_tol: 1e-6,
            max_oa_iters: 50,
            lp_warmup_rounds: 30,
            record_cuts: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    GapReached,
    Infeasible,
    TimeLimit,
}

#[derive(Clone, Debug, Serialize)]
pub struct Solution {
    /// One value per program column.
    pub values: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub status: SolveStatus,
    pub max_cone_violation: f64,
    /// Master (MILP or LP) iterations of the cut loop.
    pub oa_iterations: usize,
    /// Cut rounds spent on the continuous relaxation.
    pub warmup_rounds: usize,
    pub backend_calls: usize,
    /// Master objective per iteration, offset included.
    pub objective_history: Vec<f64>,
    /// Relaxation objective per warm-up round, offset included.
    pub warmup_history: Vec<f64>,
    #[serde(skip)]
    pub cut_log: Vec<CutRecord>,
}

impl Solution {
    fn infeasible(calls: usize) -> Self {
        Self {
            values: Vec::new(),
            objective: f64::INFINITY,
            bound: f64::INFINITY,
            status: SolveStatus::Infeasible,
            max_cone_violation: f64::NAN,
            oa_iterations: 0,
            warmup_rounds: 0,
            backend_calls: calls,
            objective_history: Vec::new(),
            warmup_history: Vec::new(),
            cut_log: Vec::new(),
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(
            self.status,
            SolveStatus::Optimal | SolveStatus::GapReached | SolveStatus::TimeLimit
        ) && !self.values.is_empty()
    }

    pub fn relative_gap(&self) -> f64 {
        (self.objective - self.bound) / self.objective.abs().max(1.0)
    }
}

/// One engine instance owns a backend and a warm cut pool; it runs one solve
/// at a time.
pub struct Engine {
    backend: Box<dyn SolverBackend>,
    pool: CutPool,
    pub options: SolveOptions,
}

impl Default for Engine {
    fn default() -> Self {
        Self::new(Box::new(HighsBackend))
    }
}

impl Engine {
    pub fn new(backend: Box<dyn SolverBackend>) -> Self {
        Self {
            backend,
            pool: CutPool::default(),
            options: SolveOptions::default(),
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(Self::new(backend_by_name(name)?))
    }

    pub fn with_options(mut self, options: SolveOptions) -> Self {
        self.options = options;
        self
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn cut_pool(&self) -> &CutPool {
        &self.pool
    }

    pub fn cut_pool_mut(&mut self) -> &mut CutPool {
        &mut self.pool
    }

    pub fn solve(&mut self, program: &Program) -> Result<Solution> {
        self.run(program, false)
    }

    /// Continuous relaxation: integrality dropped, cones kept. The objective
    /// is a lower bound on the mixed-integer optimum.
    pub fn solve_relaxation(&mut self, program: &Program) -> Result<Solution> {
        self.run(program, true)
    }

    fn run(&mut self, program: &Program, relax: bool) -> Result<Solution> {
        let caps = self.backend.capabilities();
        let free_integers = program
            .columns
            .iter()
            .any(|c| c.integer && c.lower != c.upper);
        let integral = free_integers && !relax;
        if integral && !caps.milp {
            return Err(EngineError::Unsupported {
                backend: self.backend.name(),
                reason: "program has integer columns".into(),
            });
        }
        if program.cones.is_empty() || caps.native_soc {
            return self.single_call(program, relax);
        }
        if integral {
            self.outer_approximation(program)
        } else {
            self.continuous_cut_loop(program)
        }
    }

    fn single_call(&mut self, program: &Program, relax: bool) -> Result<Solution> {
        let mode = OpenMode {
            relax_integrality: relax,
            include_cones: true,
        };
        let mut session = self.backend.open(program, mode, &self.options)?;
        let out = session.solve(self.options.time_limit_s)?;
        Ok(finish_single(program, out, self.backend.name())?)
    }

    /// Cut loop on a program with no free integers.
    fn continuous_cut_loop(&mut self, program: &Program) -> Result<Solution> {
        let timer = Instant::now();
        let mode = OpenMode {
            relax_integrality: true,
            include_cones: false,
        };
        let mut session = self.backend.open(program, mode, &self.options)?;
        session.add_rows(&self.pool.rows_for(program))?;
        let mut calls = 0;
        let mut history = Vec::new();
        let mut cut_log = Vec::new();
        let mut last: Option<Vec<f64>> = None;
        let mut bound = f64::NEG_INFINITY;
        let mut timed_out = false;
        for _ in 0..self.options.max_oa_iters.max(1) {
            let remaining = remaining(self.options.time_limit_s, &timer);
            if remaining == Some(0.0) {
                timed_out = true;
                break;
            }
            let out = session.solve(remaining)?;
            calls += 1;
            match out.status {
                BackendStatus::Infeasible => return Ok(Solution::infeasible(calls)),
                BackendStatus::Optimal | BackendStatus::Feasible => {}
                other => return Err(status_error(self.backend.name(), other)),
            }
            let objective = program.evaluate_objective(&out.values);
            history.push(objective);
            bound = bound.max(out.bound + program.objective_offset);
            let viol = cone_violations(program, &out.values, self.options.cone_tol);
            last = Some(out.values);
            if viol.is_empty() {
                break;
            }
            let cuts = generate_cuts(program, &viol);
            self.absorb(program, &cuts, &mut [session.as_mut()], &mut cut_log)?;
        }
        let values = last.expect("at least one iteration");
        let violation = program.max_cone_violation(&values);
        let converged = violation <= self.options.cone_tol;
        let objective = program.evaluate_objective(&values);
        Ok(Solution {
            status: if timed_out && !converged {
                SolveStatus::TimeLimit
            } else if converged {
                SolveStatus::Optimal
            } else {
                SolveStatus::GapReached
            },
            objective,
            bound: bound.min(objective),
            max_cone_violation: violation.max(0.0),
            oa_iterations: history.len(),
            warmup_rounds: 0,
            backend_calls: calls,
            objective_history: history,
            warmup_history: Vec::new(),
            values,
            cut_log,
        })
    }

    fn outer_approximation(&mut self, program: &Program) -> Result<Solution> {
        let timer = Instant::now();
        let opts = self.options.clone();
        let backend = self.backend.name();
        let pooled = self.pool.rows_for(program);

        let mut sub = self.backend.open(
            program,
            OpenMode {
                relax_integrality: true,
                include_cones: false,
            },
            &opts,
        )?;
        sub.add_rows(&pooled)?;
        let mut calls = 0;
        let mut cut_log = Vec::new();
        let mut warm_cuts: Vec<LinearRow> = Vec::new();

        // Phase A: relaxation warm-up.
        let mut warmup_history = Vec::new();
        for _ in 0..opts.lp_warmup_rounds {
            let out = sub.solve(remaining(opts.time_limit_s, &timer))?;
            calls += 1;
            match out.status {
                BackendStatus::Infeasible => return Ok(Solution::infeasible(calls)),
                BackendStatus::Optimal | BackendStatus::Feasible => {}
                other => return Err(status_error(backend, other)),
            }
            warmup_history.push(program.evaluate_objective(&out.values));
            let viol = cone_violations(program, &out.values, opts.cone_tol);
            log::debug!(
                "warm-up round {}: objective {:.6}, {} cones violated, {:.1}s",
                warmup_history.len(),
                warmup_history.last().unwrap_or(&f64::NAN),
                viol.len(),
                timer.elapsed().as_secs_f64()
            );
            if viol.is_empty() {
                break;
            }
            let cuts = generate_cuts(program, &viol);
            warm_cuts.extend(cuts.iter().map(|c| c.cut.to_row(&program.cones[c.cone])));
            self.absorb(program, &cuts, &mut [sub.as_mut()], &mut cut_log)?;
        }

        // Phase B/C: master MILP with fixed-integer polishing.
        let mut master = self.backend.open(
            program,
            OpenMode {
                relax_integrality: false,
                include_cones: false,
            },
            &opts,
        )?;
        master.add_rows(&pooled)?;
        master.add_rows(&warm_cuts)?;
        drop(warm_cuts);

        let integer_cols: Vec<usize> = program.integer_columns().collect();
        let mut history = Vec::new();
        let mut lower = f64::NEG_INFINITY;
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut last_master: Option<Vec<f64>> = None;
        let mut timed_out = false;

        for _ in 0..opts.max_oa_iters.max(1) {
            let budget = remaining(opts.time_limit_s, &timer);
            if budget == Some(0.0) {
                timed_out = true;
                break;
            }
            let out = master.solve(budget)?;
            calls += 1;
            match out.status {
                BackendStatus::Infeasible => return Ok(Solution::infeasible(calls)),
                BackendStatus::Optimal => {}
                BackendStatus::Feasible => timed_out = true,
                BackendStatus::Failed if remaining(opts.time_limit_s, &timer) == Some(0.0) => {
                    timed_out = true;
                    break;
                }
                other => return Err(status_error(backend, other)),
            }
            let x = out.values;
            history.push(program.evaluate_objective(&x));
            lower = lower.max(out.bound + program.objective_offset);

            let viol = cone_violations(program, &x, opts.cone_tol);
            let master_converged = viol.is_empty();
            log::debug!(
                "master {}: objective {:.6}, bound {:.6}, {} cones violated, {:.1}s",
                history.len(),
                history.last().unwrap_or(&f64::NAN),
                lower,
                viol.len(),
                timer.elapsed().as_secs_f64()
            );
            if !master_converged {
                let cuts = generate_cuts(program, &viol);
                self.absorb(
                    program,
                    &cuts,
                    &mut [master.as_mut(), sub.as_mut()],
                    &mut cut_log,
                )?;
            }

            let polished = self.polish(
                program,
                sub.as_mut(),
                master.as_mut(),
                &integer_cols,
                &x,
                &timer,
                &mut calls,
                &mut cut_log,
            )?;
            if let Some((obj, point)) = polished {
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, point));
                }
            }
            last_master = Some(x);
            if timed_out {
                break;
            }
            let closed = best
                .as_ref()
                .is_some_and(|(ub, _)| ub - lower <= opts.mip_gap * ub.abs().max(1.0));
            if master_converged || closed {
                break;
            }
        }

        let (values, fallback) = match best {
            Some((_, point)) => (point, false),
            None => match last_master {
                Some(x) => (x, true),
                None => {
                    return Ok(Solution {
                        status: SolveStatus::TimeLimit,
                        ..Solution::infeasible(calls)
                    })
                }
            },
        };
        let objective = program.evaluate_objective(&values);
        let violation = program.max_cone_violation(&values).max(0.0);
        let bound = lower.min(objective);
        let gap_ok = objective - bound <= opts.mip_gap * objective.abs().max(1.0) + 1e-9;
        let status = if !fallback && violation <= opts.cone_tol && gap_ok {
            SolveStatus::Optimal
        } else if timed_out {
            SolveStatus::TimeLimit
        } else {
            SolveStatus::GapReached
        };
        Ok(Solution {
            values,
            objective,
            bound,
            status,
            max_cone_violation: violation,
            oa_iterations: history.len(),
            warmup_rounds: warmup_history.len(),
            backend_calls: calls,
            objective_history: history,
            warmup_history,
            cut_log,
        })
    }

    /// Fixes the integers of `x` in the continuous session and runs cut
    /// rounds until the cones hold. Returns the polished point, if any.
    #[allow(clippy::too_many_arguments)]
    fn polish(
        &mut self,
        program: &Program,
        sub: &mut dyn Session,
        master: &mut dyn Session,
        integer_cols: &[usize],
        x: &[f64],
        timer: &Instant,
        calls: &mut usize,
        cut_log: &mut Vec<CutRecord>,
    ) -> Result<Option<(f64, Vec<f64>)>> {
        for &j in integer_cols {
            let col = &program.columns[j];
            let v = x[j].round().clamp(col.lower, col.upper);
            sub.set_column_bounds(j, v, v)?;
        }
        let mut found = None;
        for _ in 0..self.options.max_oa_iters.max(1) {
            let budget = remaining(self.options.time_limit_s, timer);
            if budget == Some(0.0) {
                break;
            }
            let out = sub.solve(budget)?;
            *calls += 1;
            if !matches!(out.status, BackendStatus::Optimal) {
                break;
            }
            let mut point = out.values;
            // Exact integers; all other rows were solved with them fixed.
            for &j in integer_cols {
                point[j] = point[j].round();
            }
            let viol = cone_violations(program, &point, self.options.cone_tol);
            if viol.is_empty() {
                found = Some((program.evaluate_objective(&point), point));
                break;
            }
            let cuts = generate_cuts(program, &viol);
            self.absorb(program, &cuts, &mut [&mut *sub, &mut *master], cut_log)?;
        }
        for &j in integer_cols {
            let col = &program.columns[j];
            sub.set_column_bounds(j, col.lower, col.upper)?;
        }
        Ok(found)
    }

    fn absorb(
        &mut self,
        program: &Program,
        cuts: &[CutRecord],
        sessions: &mut [&mut dyn Session],
        cut_log: &mut Vec<CutRecord>,
    ) -> Result<()> {
        let rows: Vec<LinearRow> = cuts
            .iter()
            .map(|c| c.cut.to_row(&program.cones[c.cone]))
            .collect();
        for s in sessions.iter_mut() {
            s.add_rows(&rows)?;
        }
        for c in cuts {
            self.pool.push(c.cut);
        }
        if self.options.record_cuts {
            cut_log.extend_from_slice(cuts);
        }
        Ok(())
    }
}

fn remaining(limit: Option<f64>, timer: &Instant) -> Option<f64> {
    limit.map(|l| (l - timer.elapsed().as_secs_f64()).max(0.0))
}

fn status_error(backend: &'static str, status: BackendStatus) -> EngineError {
    EngineError::Backend {
        backend,
        message: format!("unexpected backend status {status:?}"),
    }
}

fn finish_single(program: &Program, out: BackendOutcome, backend: &'static str) -> Result<Solution> {
    let status = match out.status {
        BackendStatus::Optimal => SolveStatus::Optimal,
        BackendStatus::Feasible => SolveStatus::GapReached,
        BackendStatus::Infeasible => return Ok(Solution::infeasible(1)),
        other => return Err(status_error(backend, other)),
    };
    let mut values = out.values;
    for j in program.integer_columns() {
        let col = &program.columns[j];
        if col.lower == col.upper {
            values[j] = col.lower;
        }
    }
    let objective = program.evaluate_objective(&values);
    Ok(Solution {
        max_cone_violation: program.max_cone_violation(&values).max(0.0),
        bound: (out.bound + program.objective_offset).min(objective),
        objective,
        status,
        oa_iterations: 0,
        warmup_rounds: 0,
        backend_calls: 1,
        objective_history: vec![objective],
        warmup_history: Vec::new(),
        values,
        cut_log: Vec::new(),
    })
}
