//! HiGHS MILP backend. Cones are not supported natively; the engine's
//! outer-approximation loop feeds them in as linear cuts.

use highs::{Col, HighsModelStatus, HighsSolutionStatus, Model, RowProblem, Sense};

use super::{BackendOutcome, BackendStatus, Capabilities, OpenMode, Session, SolverBackend};
use crate::error::{EngineError, Result};
use crate::program::{ColId, LinearRow, Program};
use crate::SolveOptions;

/// Set to `1` to let HiGHS print its own log.
pub const LOG_ENV: &str = "FLEETPLAN_HIGHS_LOG";

const NAME: &str = "highs";

#[derive(Clone, Copy, Debug, Default)]
pub struct HighsBackend;

impl SolverBackend for HighsBackend {
    fn name(&self) -> &'static str {
        NAME
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            milp: true,
            native_soc: false,
        }
    }

    fn open(
        &self,
        program: &Program,
        mode: OpenMode,
        options: &SolveOptions,
    ) -> Result<Box<dyn Session>> {
        if mode.include_cones && !program.cones.is_empty() {
            return Err(EngineError::Unsupported {
                backend: NAME,
                reason: "rotated cones must be passed as cuts".into(),
            });
        }
        let integral = program.has_integers() && !mode.relax_integrality;
        let mut session = HighsSession {
            model: None,
            cols: Vec::new(),
            columns: program
                .columns
                .iter()
                .map(|c| (c.cost, c.lower, c.upper, c.integer && !mode.relax_integrality))
                .collect(),
            rows: program.rows.clone(),
            integral,
            mip_gap: options.mip_gap,
            // MIP presolve has returned "optimal" points well above the true
            // optimum on models carrying many near-parallel cone cuts.
            presolve_off: integral,
            use_ipm: false,
        };
        session.rebuild()?;
        Ok(Box::new(session))
    }
}

/// Keeps a copy of everything loaded so the HiGHS model can be rebuilt when
/// a run errors out (a failed run consumes the model).
struct HighsSession {
    model: Option<Model>,
    cols: Vec<Col>,
    /// cost, lower, upper, integer
    columns: Vec<(f64, f64, f64, bool)>,
    rows: Vec<LinearRow>,
    integral: bool,
    mip_gap: f64,
    /// Always set for MIP sessions; set for LP sessions once presolve has
    /// wrongly declared them infeasible.
    presolve_off: bool,
    /// Set once simplex has failed on this session.
    use_ipm: bool,
}

fn backend_error(message: String) -> EngineError {
    EngineError::Backend {
        backend: NAME,
        message,
    }
}

impl HighsSession {
    fn model(&mut self) -> &mut Model {
        self.model.as_mut().expect("model present between solves")
    }

    fn rebuild(&mut self) -> Result<()> {
        let mut problem = RowProblem::default();
        self.cols = self
            .columns
            .iter()
            .map(|&(cost, lo, hi, integer)| problem.add_column_with_integrality(cost, lo..=hi, integer))
            .collect();
        for row in &self.rows {
            problem.add_row(
                row.lower..=row.upper,
                row.terms.iter().map(|&(j, a)| (self.cols[j], a)),
            );
        }
        let mut model = problem
            .try_optimise(Sense::Minimise)
            .map_err(|e| backend_error(format!("model load: {e:?}")))?;
        model.make_quiet();
        if std::env::var_os(LOG_ENV).is_some_and(|v| v == "1") {
            model.set_option("output_flag", true);
            model.set_option("log_to_console", true);
        }
        model.set_option("threads", 1);
        model.set_option("mip_rel_gap", self.mip_gap);
        model.set_option("mip_abs_gap", 1e-9);
        if self.presolve_off {
            model.set_option("presolve", "off");
        }
        if self.use_ipm && !self.integral {
            model.set_option("solver", "ipm");
        }
        self.model = Some(model);
        Ok(())
    }
}

impl Session for HighsSession {
    fn add_rows(&mut self, rows: &[LinearRow]) -> Result<()> {
        for row in rows {
            let terms: Vec<(Col, f64)> = row.terms.iter().map(|&(j, a)| (self.cols[j], a)).collect();
            self.model()
                .try_add_row(row.lower..=row.upper, terms)
                .map_err(|e| backend_error(format!("add row: {e:?}")))?;
        }
        self.rows.extend_from_slice(rows);
        Ok(())
    }

    fn set_column_bounds(&mut self, col: ColId, lower: f64, upper: f64) -> Result<()> {
        let handle = self.cols[col];
        self.model().change_column_bounds(handle, lower..=upper);
        self.columns[col].1 = lower;
        self.columns[col].2 = upper;
        Ok(())
    }

    fn solve(&mut self, time_limit_s: Option<f64>) -> Result<BackendOutcome> {
        let out = self.solve_recovering(time_limit_s)?;
        if out.status != BackendStatus::Infeasible || self.presolve_off {
            return Ok(out);
        }
        // HiGHS presolve occasionally reports infeasibility on models with
        // many near-tangent cuts; confirm without it before believing it.
        self.presolve_off = true;
        self.model().set_option("presolve", "off");
        let retry = self.solve_recovering(time_limit_s)?;
        if retry.status != BackendStatus::Infeasible {
            log::info!("HiGHS presolve infeasibility not confirmed; presolve disabled for this session");
        }
        Ok(retry)
    }
}

impl HighsSession {
    /// One run; if HiGHS errors or gives up without a point, the model is
    /// rebuilt from scratch (no basis, interior point for LPs) and run again.
    fn solve_recovering(&mut self, time_limit_s: Option<f64>) -> Result<BackendOutcome> {
        let started = std::time::Instant::now();
        let first = self.solve_once(time_limit_s);
        let retry = match &first {
            Err(_) => true,
            Ok(out) => out.status == BackendStatus::Failed && out.values.is_empty(),
        };
        if !retry {
            return first;
        }
        let budget = time_limit_s.map(|t| (t - started.elapsed().as_secs_f64()).max(0.0));
        if budget == Some(0.0) {
            if self.model.is_none() {
                self.rebuild()?;
            }
            return first;
        }
        log::info!("HiGHS run failed ({}); rebuilding the model", match &first {
            Err(e) => e.to_string(),
            Ok(_) => "no solution".into(),
        });
        self.use_ipm = true;
        self.rebuild()?;
        let out = self.solve_once(budget);
        if self.model.is_none() {
            self.rebuild()?;
        }
        out
    }

    fn solve_once(&mut self, time_limit_s: Option<f64>) -> Result<BackendOutcome> {
        let mut model = self.model.take().expect("model present between solves");
        model.set_option("time_limit", time_limit_s.unwrap_or(f64::INFINITY).max(1e-3));
        let solved = model
            .try_solve()
            .map_err(|e| backend_error(format!("run: {e:?}")))?;
        let model_status = solved.status();
        let has_point = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let status = match model_status {
            HighsModelStatus::Optimal => BackendStatus::Optimal,
            HighsModelStatus::Infeasible => BackendStatus::Infeasible,
            HighsModelStatus::Unbounded => BackendStatus::Unbounded,
            HighsModelStatus::UnboundedOrInfeasible => BackendStatus::Infeasible,
            _ if has_point => BackendStatus::Feasible,
            _ => BackendStatus::Failed,
        };
        let (values, objective) = if has_point || status == BackendStatus::Optimal {
            (solved.get_solution().columns().to_vec(), solved.objective_value())
        } else {
            (Vec::new(), f64::NAN)
        };
        let bound = if self.integral {
            solved
                .double_info_value(c"mip_dual_bound")
                .unwrap_or(objective)
        } else {
            objective
        };
        if status == BackendStatus::Failed {
            log::warn!("HiGHS ended with model status {model_status:?}");
        }
        self.model = Some(Model::from(solved));
        Ok(BackendOutcome {
            status,
            values,
            objective,
            bound,
        })
    }
}
