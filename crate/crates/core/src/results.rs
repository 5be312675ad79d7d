//! Result files of a run.
//!
//! ```text
//! <label>.json              KPI record, investment, config and case hashes
//! <label>_<role>.json       one solved model: spec, registry, raw values
//! <label>_slack.csv         period,import_kw,export_kw,net_kw
//! <label>_soc.csv           period,slot_0,...
//! <label>_cs_power.csv      period,s<slot>_b<bus>,...
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use fleetplan_engine::{Solution, SolveStatus};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::domain::CaseBundle;
use crate::error::{CoreError, Result};
use crate::formulation::{build_model, ModelSpec, VariableRegistry};
use crate::io::case_hash;
use crate::kpi::{collect_flows, KpiRecord};
use crate::scenario::{PartRole, Placement, ScenarioOutcome, SolvedPart};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub case_hash: String,
    pub objective: f64,
    pub kpis: KpiRecord,
    /// File names of the part documents, next to this one.
    pub parts: Vec<String>,
    /// Station buses tried by a free-location run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub placements: Vec<Placement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartDocument {
    pub scenario: String,
    pub role: PartRole,
    pub config_hash: String,
    pub case_hash: String,
    pub spec: ModelSpec,
    pub registry: VariableRegistry,
    pub status: SolveStatus,
    pub objective: f64,
    pub bound: f64,
    pub max_cone_violation: f64,
    pub oa_iterations: usize,
    pub backend_calls: usize,
    pub values: Vec<f64>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| CoreError::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes every file of an outcome into `dir`; returns the paths written,
/// the scenario document first.
pub fn write_outcome(dir: &Path, case: &CaseBundle, outcome: &ScenarioOutcome) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let label = outcome.config.label();
    let hash = case_hash(case);
    let mut written = Vec::new();
    let mut part_names = Vec::new();
    for part in &outcome.parts {
        let name = format!("{label}_{}.json", part.role.as_str());
        let doc = PartDocument {
            scenario: label.clone(),
            role: part.role,
            config_hash: outcome.config.config_hash(),
            case_hash: hash.clone(),
            spec: part.model.spec.clone(),
            registry: part.model.registry.clone(),
            status: part.solution.status,
            objective: part.solution.objective,
            bound: part.solution.bound,
            max_cone_violation: part.solution.max_cone_violation,
            oa_iterations: part.solution.oa_iterations,
            backend_calls: part.solution.backend_calls,
            values: part.solution.values.clone(),
        };
        let path = dir.join(&name);
        write_json(&path, &doc)?;
        written.push(path);
        part_names.push(name);
    }
    let doc = ScenarioDocument {
        scenario: label.clone(),
        config: outcome.config.clone(),
        config_hash: outcome.config.config_hash(),
        case_hash: hash,
        objective: outcome.objective(),
        kpis: outcome.kpis.clone(),
        parts: part_names,
        placements: outcome.placements.clone(),
    };
    let path = dir.join(format!("{label}.json"));
    write_json(&path, &doc)?;
    written.insert(0, path);
    written.extend(write_time_series(dir, &label, case, &outcome.parts)?);
    Ok(written)
}

fn write_time_series(dir: &Path, label: &str, case: &CaseBundle, parts: &[SolvedPart]) -> Result<Vec<PathBuf>> {
    let flows = collect_flows(case, parts);
    let mut out = Vec::new();

    let path = dir.join(format!("{label}_slack.csv"));
    let mut rows = vec![vec!["period".into(), "import_kw".into(), "export_kw".into(), "net_kw".into()]];
    for t in 0..case.periods() {
        let (i, e) = (flows.imports_kw[t], flows.exports_kw[t]);
        rows.push(vec![t.to_string(), i.to_string(), e.to_string(), (i - e).to_string()]);
    }
    write_csv(&path, &rows)?;
    out.push(path);

    let provider = parts.iter().find(|p| p.model.registry.soc.is_some());
    if let Some(part) = provider {
        let reg = &part.model.registry;
        let x = &part.solution.values;
        let soc = reg.soc.as_ref().expect("checked");
        let path = dir.join(format!("{label}_soc.csv"));
        let mut header = vec!["period".to_string()];
        header.extend((0..case.fleet_slots).map(|n| format!("slot_{n}")));
        let mut rows = vec![header];
        for t in 0..case.periods() {
            let mut row = vec![t.to_string()];
            row.extend((0..case.fleet_slots).map(|n| x[soc.at(&[n, t])].to_string()));
            rows.push(row);
        }
        write_csv(&path, &rows)?;
        out.push(path);

        let p_cs = reg.p_cs.as_ref().expect("provider");
        let path = dir.join(format!("{label}_cs_power.csv"));
        let mut header = vec!["period".to_string()];
        for s in 0..case.cs_slots {
            header.extend(reg.cs_locations.iter().map(|b| format!("s{s}_b{b}")));
        }
        let mut rows = vec![header];
        for t in 0..case.periods() {
            let mut row = vec![t.to_string()];
            for s in 0..case.cs_slots {
                row.extend((0..reg.cs_locations.len()).map(|l| x[p_cs.at(&[s, l, t])].to_string()));
            }
            rows.push(row);
        }
        write_csv(&path, &rows)?;
        out.push(path);
    }
    Ok(out)
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CoreError::data(path.display().to_string(), 0, e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CoreError::data(path.display().to_string(), 0, e.to_string()))?;
    }
    w.flush().map_err(|e| CoreError::io(path, e))
}

pub fn read_scenario_document(path: &Path) -> Result<ScenarioDocument> {
    read_json(path)
}

pub fn read_part_document(path: &Path) -> Result<PartDocument> {
    read_json(path)
}

/// Rebuilds the model a part was solved on and attaches its stored values.
/// Fails when the case differs from the one the part was solved on.
pub fn restore_part(case: &CaseBundle, doc: &PartDocument) -> Result<SolvedPart> {
    if doc.case_hash != case_hash(case) {
        return Err(CoreError::Model(format!(
            "{} {}: solved on case {}, given case {}",
            doc.scenario,
            doc.role.as_str(),
            doc.case_hash,
            case_hash(case)
        )));
    }
    let model = build_model(case, &doc.spec)?;
    if model.registry != doc.registry || model.program.num_columns() != doc.values.len() {
        return Err(CoreError::Model("stored registry does not match the rebuilt model".into()));
    }
    let solution = Solution {
        values: doc.values.clone(),
        objective: doc.objective,
        bound: doc.bound,
        status: doc.status,
        max_cone_violation: doc.max_cone_violation,
        oa_iterations: doc.oa_iterations,
        warmup_rounds: 0,
        backend_calls: doc.backend_calls,
        objective_history: Vec::new(),
        warmup_history: Vec::new(),
        cut_log: Vec::new(),
    };
    Ok(SolvedPart { role: doc.role, model, solution })
}

/// Loads a scenario document together with its parts, from the files named
/// in it.
pub fn load_outcome_parts(case: &CaseBundle, scenario_path: &Path) -> Result<(ScenarioDocument, Vec<SolvedPart>)> {
    let doc = read_scenario_document(scenario_path)?;
    let dir = scenario_path.parent().unwrap_or(Path::new("."));
    let parts = doc
        .parts
        .iter()
        .map(|name| restore_part(case, &read_part_document(&dir.join(name))?))
        .collect::<Result<Vec<_>>>()?;
    Ok((doc, parts))
}
