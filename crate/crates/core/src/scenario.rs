//! Scenario pipelines: community and provider stand-alone in sequence, or
//! the joint model with its V2G, location and peak-tariff variants.

use fleetplan_engine::{Engine, Solution};
use serde::{Deserialize, Serialize};

use crate::config::{Coordination, CsLocation, ScenarioConfig, SolverSettings};
use crate::domain::CaseBundle;
use crate::error::{CoreError, Result};
use crate::formulation::{build_model, ModelInstance, ModelSpec};
use crate::kpi::{compute_kpis, KpiRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartRole {
    Community,
    Provider,
    Coordinated,
}

impl PartRole {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Community => "ec",
            Self::Provider => "msp",
            Self::Coordinated => "coordinated",
        }
    }
}

/// One solved model of a pipeline.
#[derive(Clone, Debug)]
pub struct SolvedPart {
    pub role: PartRole,
    pub model: ModelInstance,
    pub solution: Solution,
}

impl SolvedPart {
    /// Net slack exchange per period (kW, import positive).
    pub fn slack_profile(&self) -> Vec<f64> {
        let reg = &self.model.registry;
        let x = &self.solution.values;
        match &reg.p_slack {
            Some(b) => b.values(x).to_vec(),
            None => {
                let i = reg.i_sup.as_ref().expect("supply block").values(x);
                let e = reg.e_sup.as_ref().expect("supply block").values(x);
                i.iter().zip(e).map(|(a, b)| a - b).collect()
            }
        }
    }
}

/// One station bus tried while searching a free location.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub bus: usize,
    pub objective: f64,
    pub losses_kwh: f64,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub config: ScenarioConfig,
    pub parts: Vec<SolvedPart>,
    pub kpis: KpiRecord,
    /// Filled by free-location runs: every bus the station was tried at.
    pub placements: Vec<Placement>,
}

impl ScenarioOutcome {
    pub fn objective(&self) -> f64 {
        self.parts.iter().map(|p| p.solution.objective).sum()
    }

    pub fn part(&self, role: PartRole) -> Option<&SolvedPart> {
        self.parts.iter().find(|p| p.role == role)
    }
}

/// An engine shared across the runs of one case, so that cone cuts found
/// in one scenario warm-start the next.
pub struct ScenarioRunner {
    engine: Engine,
}

impl ScenarioRunner {
    pub fn new(settings: &SolverSettings) -> Result<Self> {
        let engine = Engine::from_name(&settings.backend)?.with_options(settings.solve_options());
        Ok(Self { engine })
    }

    pub fn with_engine(engine: Engine) -> Self {
        Self { engine }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    fn solve(&mut self, role: PartRole, model: ModelInstance) -> Result<SolvedPart> {
        let solution = self.engine.solve(&model.program)?;
        if !solution.is_feasible() {
            return Err(CoreError::Infeasible(format!(
                "{} model: solver status {:?}",
                role.as_str(),
                solution.status
            )));
        }
        log::info!(
            "{} model solved: objective {:.2}, status {:?}, cone violation {:.2e}, {} backend calls",
            role.as_str(),
            solution.objective,
            solution.status,
            solution.max_cone_violation,
            solution.backend_calls
        );
        Ok(SolvedPart { role, model, solution })
    }

    /// Community dispatch without the provider; returns the part and its
    /// slack exchange per period.
    pub fn run_ec_standalone(&mut self, case: &CaseBundle) -> Result<(SolvedPart, Vec<f64>)> {
        let model = build_model(case, &ModelSpec::community_only())?;
        let part = self.solve(PartRole::Community, model)?;
        let profile = part.slack_profile();
        Ok((part, profile))
    }

    /// The provider alone at the slack bus, importing within the transformer
    /// headroom left by `community_slack_kw`.
    pub fn run_msp_standalone(&mut self, case: &CaseBundle, community_slack_kw: &[f64]) -> Result<SolvedPart> {
        let rating = case.network.transformer_kw;
        if community_slack_kw.iter().all(|&p| p >= rating) {
            log::warn!("no residual transformer capacity in any period; the provider cannot charge");
        }
        let model = build_model(case, &ModelSpec::provider_only(community_slack_kw.to_vec()))?;
        self.solve(PartRole::Provider, model)
    }

    pub fn run_coordinated(&mut self, case: &CaseBundle, cfg: &ScenarioConfig) -> Result<SolvedPart> {
        let model = build_model(case, &ModelSpec::coordinated(cfg)?)?;
        self.solve(PartRole::Coordinated, model)
    }

    /// With a single station slot, a free location is the best of the
    /// single-bus placements; solving them one by one is exact and far
    /// lighter than the joint model. Ties go to the lower bus index.
    fn run_free_location(&mut self, case: &CaseBundle, cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
        let mut best: Option<(SolvedPart, KpiRecord)> = None;
        let mut placements = Vec::new();
        for bus in 0..case.network.bus_count() {
            let mut at = cfg.clone();
            at.cs_location = CsLocation::Bus(bus);
            let part = self.run_coordinated(case, &at)?;
            let kpis = compute_kpis(case, cfg, std::slice::from_ref(&part));
            log::info!("station at bus {bus}: objective {:.3}, losses {:.2} kWh/year", part.solution.objective, kpis.losses_kwh);
            placements.push(Placement { bus, objective: part.solution.objective, losses_kwh: kpis.losses_kwh });
            if best.as_ref().is_none_or(|(b, _)| part.solution.objective < b.solution.objective) {
                best = Some((part, kpis));
            }
        }
        let (part, kpis) = best.expect("a network has at least the slack bus");
        Ok(ScenarioOutcome { config: cfg.clone(), parts: vec![part], kpis, placements })
    }

    pub fn run_scenario(&mut self, case: &CaseBundle, cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
        if cfg.coordination == Coordination::Coordinated && cfg.cs_location == CsLocation::Free && case.cs_slots == 1 {
            return self.run_free_location(case, cfg);
        }
        let parts = match cfg.coordination {
            Coordination::Standalone => {
                let (ec, profile) = self.run_ec_standalone(case)?;
                let msp = self.run_msp_standalone(case, &profile)?;
                vec![ec, msp]
            }
            Coordination::Coordinated => vec![self.run_coordinated(case, cfg)?],
        };
        let kpis = compute_kpis(case, cfg, &parts);
        Ok(ScenarioOutcome { config: cfg.clone(), parts, kpis, placements: Vec::new() })
    }
}

/// Runs one scenario with a fresh engine built from the config's solver
/// settings.
pub fn run_scenario(case: &CaseBundle, cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    ScenarioRunner::new(&cfg.solver)?.run_scenario(case, cfg)
}
