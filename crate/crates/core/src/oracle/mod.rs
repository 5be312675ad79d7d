//! Independent checks: exhaustive search on tiny cases, an AC power flow and
//! a constraint audit of solved parts.

mod acflow;
mod audit;
mod brute;

pub use acflow::{ac_power_flow, AcState, MAX_SWEEPS, SWEEP_TOL_PU};
pub use audit::{recompute_objective, verify_solution, AuditReport, FamilyCheck};
pub use brute::{binary_count, brute_force_plan, BruteForceResult, MAX_BRUTE_FORCE_BINARIES};

use crate::domain::CaseBundle;
use crate::error::Result;
use crate::scenario::SolvedPart;

/// Worst gap between solution and AC sweep, each period solved on the
/// solution's own bus injections.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct AcComparison {
    pub max_voltage_dev_pu: f64,
    pub max_current_sqr_dev_pu: f64,
    pub max_losses_dev_kw: f64,
    pub periods: usize,
}

pub fn compare_with_ac(case: &CaseBundle, part: &SolvedPart) -> Result<AcComparison> {
    let reg = &part.model.registry;
    let x = &part.solution.values;
    let net = &case.network;
    let (Some(p_inj), Some(q_inj), Some(v_sqr), Some(i_sqr)) = (&reg.p_inj, &reg.q_inj, &reg.v_sqr, &reg.i_sqr) else {
        return Ok(AcComparison::default());
    };
    let mut out = AcComparison { periods: case.periods(), ..Default::default() };
    for t in 0..case.periods() {
        let p: Vec<f64> = (0..net.bus_count()).map(|b| x[p_inj.at(&[b, t])]).collect();
        let q: Vec<f64> = (0..net.bus_count()).map(|b| x[q_inj.at(&[b, t])]).collect();
        let ac = ac_power_flow(net, &p, &q)?;
        let mut losses = 0.0;
        for b in 0..net.bus_count() {
            let v = x[v_sqr.at(&[b, t])].max(0.0).sqrt();
            out.max_voltage_dev_pu = out.max_voltage_dev_pu.max((v - ac.v_mag(b)).abs());
        }
        for b in net.line_buses() {
            let i = x[i_sqr.at(&[b - 1, t])];
            out.max_current_sqr_dev_pu = out.max_current_sqr_dev_pu.max((i - ac.i_sqr(b)).abs());
            losses += net.r_pu(b) * i * net.base_power_kva;
        }
        out.max_losses_dev_kw = out.max_losses_dev_kw.max((losses - ac.losses_kw).abs());
    }
    Ok(out)
}
