//! Case + scenario flags → solver-agnostic mixed-integer cone program.
//!
//! Units: powers in kW, energies in kWh, money in €/year. Network flows,
//! squared currents and squared voltages are per unit on the network base;
//! the nodal balances convert kW injections with `1 / base_power_kva`.

mod registry;

use std::io::Write;

use fleetplan_engine::{ColId, Program, RotatedCone};
use serde::{Deserialize, Serialize};

use crate::config::{Coordination, CsLocation, PeakTariff, ScenarioConfig};
use crate::domain::{
    away_energy_cap, capital_recovery_factor, overlapping_pairs, CaseBundle, RadialNetwork,
    RideCalendar,
};
use crate::error::{CoreError, Result};

pub use registry::{Block, VariableRegistry};

/// Row tags, one per constraint family.
pub mod tags {
    use fleetplan_engine::RowTag;

    pub const EV_MODEL: RowTag = RowTag("5");
    pub const CS_MODEL: RowTag = RowTag("6");
    pub const ONE_CAR_PER_RIDE: RowTag = RowTag("7");
    pub const RIDE_NEEDS_CAR: RowTag = RowTag("8");
    pub const NO_OVERLAP: RowTag = RowTag("9");
    pub const STATE_NEEDS_CAR: RowTag = RowTag("10");
    pub const PLUG_NEEDS_STATION: RowTag = RowTag("11");
    pub const IN_USE: RowTag = RowTag("12");
    pub const EV_POWER: RowTag = RowTag("13");
    pub const STATION_SUM: RowTag = RowTag("14");
    pub const STATION_POWER: RowTag = RowTag("15");
    pub const SOC_RECURSION: RowTag = RowTag("16");
    pub const SOC_BOUNDS: RowTag = RowTag("17");
    pub const DEPARTURE_SOC: RowTag = RowTag("18");
    pub const AWAY_CAP: RowTag = RowTag("19");
    pub const BUS_INJECTION: RowTag = RowTag("20");
    pub const SLACK_EXCHANGE: RowTag = RowTag("21");
    pub const ACTIVE_BALANCE: RowTag = RowTag("22");
    pub const REACTIVE_BALANCE: RowTag = RowTag("23");
    pub const VOLTAGE_DROP: RowTag = RowTag("24");
    pub const CONE: RowTag = RowTag("25");
    pub const TRANSFORMER: RowTag = RowTag("28");
    pub const PEAK: RowTag = RowTag("peak");
    pub const V2G_CAP: RowTag = RowTag("v2g-cap");

    /// Every tag a built model may carry.
    pub const ALL: [&str; 27] = [
        "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "13", "14", "15", "16", "17",
        "18", "19", "20", "21", "22", "23", "24", "25", "26", "27", "28",
    ];
    pub const EXTRA: [&str; 3] = ["peak", "v2g-cap", "link"];
}

/// Which actors a model contains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelScope {
    /// Community and provider on one network.
    Coordinated,
    /// Community dispatch alone: no fleet, no stations.
    CommunityOnly,
    /// Provider alone behind the slack, importing within the transformer
    /// headroom left by the community slack exchange.
    ProviderOnly { community_slack_kw: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub scope: ModelScope,
    pub v2g: bool,
    pub v2g_restriction: bool,
    pub cs_location: CsLocation,
    pub peak: PeakTariff,
}

impl ModelSpec {
    /// The joint model of a coordinated configuration.
    pub fn coordinated(cfg: &ScenarioConfig) -> Result<Self> {
        if cfg.coordination != Coordination::Coordinated {
            return Err(CoreError::Model(
                "stand-alone configurations need the two-stage pipeline".into(),
            ));
        }
        Ok(Self {
            scope: ModelScope::Coordinated,
            v2g: cfg.v2g_enabled,
            v2g_restriction: cfg.v2g_restriction,
            cs_location: cfg.cs_location,
            peak: cfg.peak_tariff,
        })
    }

    pub fn community_only() -> Self {
        Self {
            scope: ModelScope::CommunityOnly,
            v2g: false,
            v2g_restriction: true,
            cs_location: CsLocation::SlackOnly,
            peak: PeakTariff::NoneFixed,
        }
    }

    pub fn provider_only(community_slack_kw: Vec<f64>) -> Self {
        Self {
            scope: ModelScope::ProviderOnly { community_slack_kw },
            v2g: false,
            v2g_restriction: true,
            cs_location: CsLocation::SlackOnly,
            peak: PeakTariff::NoneFixed,
        }
    }

    pub fn has_provider(&self) -> bool {
        !matches!(self.scope, ModelScope::CommunityOnly)
    }

    pub fn has_network(&self) -> bool {
        !matches!(self.scope, ModelScope::ProviderOnly { .. })
    }

    pub fn has_v2g_cap(&self) -> bool {
        self.v2g && self.v2g_restriction && self.has_network()
    }
}

/// A built program together with the handles needed to read it back.
#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub registry: VariableRegistry,
    pub program: Program,
    pub spec: ModelSpec,
    pub annualization: f64,
    pub annuity_factor: f64,
}

impl ModelInstance {
    pub fn rows_with_tag(&self, tag: &str) -> usize {
        self.program.rows_with_tag(tag)
    }
}

const FLOW_BOUND_PU: f64 = 50.0;
const INF: f64 = f64::INFINITY;

/// Builds the full model: variables, then every constraint family in a
/// fixed order, then the objective.
pub fn build_model(case: &CaseBundle, spec: &ModelSpec) -> Result<ModelInstance> {
    let report = crate::domain::validate_case(case);
    if !report.is_valid() {
        return Err(CoreError::Invalid(report));
    }
    if let ModelScope::ProviderOnly { community_slack_kw } = &spec.scope {
        if community_slack_kw.len() != case.periods() {
            return Err(CoreError::Model(format!(
                "residual profile has {} periods, case has {}",
                community_slack_kw.len(),
                case.periods()
            )));
        }
    }
    if let CsLocation::Bus(b) = spec.cs_location {
        if b >= case.network.bus_count() {
            return Err(CoreError::Model(format!("station bus {b} not in network")));
        }
    }
    let mut model = declare_variables(case, spec)?;
    if spec.has_provider() {
        add_investment_constraints(&mut model, case);
        add_assignment_constraints(&mut model, case);
        add_ev_operation_constraints(&mut model, case);
    }
    add_power_balance(&mut model, case);
    if spec.has_network() {
        add_distflow_constraints(&mut model, case);
    }
    add_transformer_bound(&mut model, case);
    add_objective(&mut model, case);
    add_peak_tariff(&mut model, case);
    Ok(model)
}

fn declare_variables(case: &CaseBundle, spec: &ModelSpec) -> Result<ModelInstance> {
    use registry::declare;
    let mut p = Program::new();
    let mut reg = VariableRegistry::default();
    let n = case.fleet_slots;
    let k = case.ev_catalog.len();
    let s = case.cs_slots;
    let c = case.cs_catalog.len();
    let buses = case.network.bus_count();
    let t_len = case.periods();
    let pev_max = case.max_ev_power();
    let pcs_max = case.max_cs_power();
    let dt = case.grid.step_hours;

    if spec.has_provider() {
        let allowed = |b: usize| {
            if spec.has_network() {
                spec.cs_location.allows(b)
            } else {
                b == RadialNetwork::SLACK
            }
        };
        reg.cs_locations = (0..buses).filter(|&b| allowed(b)).collect();
        if reg.cs_locations.is_empty() {
            return Err(CoreError::Model("no bus may host a station".into()));
        }
        reg.ev_invest = Some(declare(&mut p, "delta_ev", &[n, k], |_| (0.0, 1.0, true)));
        reg.cs_invest = Some(declare(&mut p, "delta_cs", &[s, buses, c], |i| {
            (0.0, if allowed(i[1]) { 1.0 } else { 0.0 }, true)
        }));
        reg.ride_use = Some(declare(&mut p, "delta_use", &[n, case.rides.len()], |_| {
            (0.0, 1.0, true)
        }));
        reg.state = Some(declare(&mut p, "delta_state", &[n, s + 1, t_len], |_| {
            (0.0, 1.0, true)
        }));
        let lo_ev = if spec.v2g { -pev_max } else { 0.0 };
        reg.p_ev = Some(declare(&mut p, "p_ev", &[n, s, t_len], |_| (lo_ev, pev_max, false)));
        if spec.has_v2g_cap() {
            reg.discharge = Some(declare(&mut p, "d_ev", &[n, s, t_len], |_| {
                (0.0, pev_max, false)
            }));
        }
        let e_max = case.max_ev_capacity();
        reg.soc = Some(declare(&mut p, "s_ev", &[n, t_len], |_| (0.0, e_max, false)));
        let lo_cs = if spec.v2g { -pcs_max } else { 0.0 };
        let locs = reg.cs_locations.len();
        reg.p_cs = Some(declare(&mut p, "p_cs", &[s, locs, t_len], |_| {
            (lo_cs, pcs_max, false)
        }));
        let caps: Vec<f64> = case
            .rides
            .iter()
            .map(|r| away_energy_cap(r, case.away_power_kw, dt))
            .collect();
        reg.e_away = Some(declare(&mut p, "e_away", &[n, case.rides.len()], |i| {
            (0.0, caps[i[1]], false)
        }));
    }

    if spec.has_network() {
        let pv = case.bus_pv_potential();
        reg.pv_buses = (0..buses).filter(|&b| pv[b].iter().any(|&v| v > 0.0)).collect();
        let pv_buses = reg.pv_buses.clone();
        reg.p_pv = Some(declare(&mut p, "p_pv", &[pv_buses.len(), t_len], |i| {
            (0.0, pv[pv_buses[i[0]]][i[1]], false)
        }));
        reg.p_inj = Some(declare(&mut p, "p_inj", &[buses, t_len], |_| (-INF, INF, false)));
        let q_load = case.bus_reactive_load();
        reg.q_inj = Some(declare(&mut p, "q_inj", &[buses, t_len], |i| {
            let q = -q_load[i[0]][i[1]];
            (q, q, false)
        }));
        let lines = buses - 1;
        let net = &case.network;
        reg.p_line = Some(declare(&mut p, "p_line", &[lines, t_len], |_| {
            (-FLOW_BOUND_PU, FLOW_BOUND_PU, false)
        }));
        reg.q_line = Some(declare(&mut p, "q_line", &[lines, t_len], |_| {
            (-FLOW_BOUND_PU, FLOW_BOUND_PU, false)
        }));
        reg.i_sqr = Some(declare(&mut p, "i_sqr", &[lines, t_len], |i| {
            (0.0, net.amp_limit_sqr_pu(i[0] + 1), false)
        }));
        reg.v_sqr = Some(declare(&mut p, "v_sqr", &[buses, t_len], |i| {
            if i[0] == RadialNetwork::SLACK {
                (1.0, 1.0, false)
            } else {
                (net.v_min_sqr, net.v_max_sqr, false)
            }
        }));
    }

    reg.i_sup = Some(declare(&mut p, "i_sup", &[t_len], |_| (0.0, INF, false)));
    let export_hi = if spec.has_network() { INF } else { 0.0 };
    reg.e_sup = Some(declare(&mut p, "e_sup", &[t_len], |_| (0.0, export_hi, false)));
    if spec.has_network() {
        reg.p_slack = Some(declare(&mut p, "p_slack", &[t_len], |_| (-INF, INF, false)));
        reg.q_slack = Some(declare(&mut p, "q_slack", &[t_len], |_| (-INF, INF, false)));
    }
    match spec.peak {
        PeakTariff::NoneFixed => {}
        PeakTariff::Individual => {
            if spec.has_network() {
                reg.peak_bus = Some(declare(&mut p, "peak_bus", &[buses], |_| (0.0, INF, false)));
            }
        }
        PeakTariff::Collective => {
            reg.peak_coll = Some(declare(&mut p, "peak_coll", &[1], |_| (0.0, INF, false)));
        }
    }

    Ok(ModelInstance {
        registry: reg,
        program: p,
        spec: spec.clone(),
        annualization: case.grid.annualization_factor(),
        annuity_factor: capital_recovery_factor(
            case.finance.discount_rate,
            case.finance.horizon_years,
        )?,
    })
}

fn ev_sum(reg: &VariableRegistry, n: usize, coeff: impl Fn(usize) -> f64, k: usize) -> Vec<(ColId, f64)> {
    (0..k).map(|j| (reg.ev().at(&[n, j]), coeff(j))).collect()
}

/// One model per EV slot and one (bus, model) per station slot.
pub fn add_investment_constraints(model: &mut ModelInstance, case: &CaseBundle) {
    let reg = &model.registry;
    let p = &mut model.program;
    let k = case.ev_catalog.len();
    for n in 0..case.fleet_slots {
        p.add_le(tags::EV_MODEL, ev_sum(reg, n, |_| 1.0, k), 1.0);
    }
    let cs = reg.cs_invest.as_ref().expect("provider model");
    for s in 0..case.cs_slots {
        let terms = (0..case.network.bus_count())
            .flat_map(|b| (0..case.cs_catalog.len()).map(move |c| (b, c)))
            .map(|(b, c)| (cs.at(&[s, b, c]), 1.0))
            .collect();
        p.add_le(tags::CS_MODEL, terms, 1.0);
    }
}

/// Ride assignment, overlap exclusion and vehicle states.
pub fn add_assignment_constraints(model: &mut ModelInstance, case: &CaseBundle) {
    let reg = &model.registry;
    let p = &mut model.program;
    let k = case.ev_catalog.len();
    let rides = case.rides.len();
    let slots = case.fleet_slots;
    let s_len = case.cs_slots;
    let use_ = reg.ride_use.as_ref().expect("provider model");
    let state = reg.state.as_ref().expect("provider model");
    let cs = reg.cs_invest.as_ref().expect("provider model");
    let in_use = s_len;

    for r in 0..rides {
        let terms = (0..slots).map(|n| (use_.at(&[n, r]), 1.0)).collect();
        p.add_le(tags::ONE_CAR_PER_RIDE, terms, 1.0);
    }
    for n in 0..slots {
        for r in 0..rides {
            let mut terms = vec![(use_.at(&[n, r]), 1.0)];
            terms.extend(ev_sum(reg, n, |_| -1.0, k));
            p.add_le(tags::RIDE_NEEDS_CAR, terms, 0.0);
        }
    }
    let pairs = overlapping_pairs(&case.rides);
    for n in 0..slots {
        for &(a, b) in &pairs {
            p.add_le(
                tags::NO_OVERLAP,
                vec![(use_.at(&[n, a]), 1.0), (use_.at(&[n, b]), 1.0)],
                1.0,
            );
        }
    }
    let periods = case.periods();
    for n in 0..slots {
        for t in 0..periods {
            let mut terms: Vec<(ColId, f64)> =
                (0..=s_len).map(|s| (state.at(&[n, s, t]), 1.0)).collect();
            terms.extend(ev_sum(reg, n, |_| -1.0, k));
            p.add_le(tags::STATE_NEEDS_CAR, terms, 0.0);
        }
    }
    let buses = case.network.bus_count();
    let models = case.cs_catalog.len();
    for n in 0..slots {
        for s in 0..s_len {
            for t in 0..periods {
                let mut terms = vec![(state.at(&[n, s, t]), 1.0)];
                for b in 0..buses {
                    for c in 0..models {
                        terms.push((cs.at(&[s, b, c]), -1.0));
                    }
                }
                p.add_le(tags::PLUG_NEEDS_STATION, terms, 0.0);
            }
        }
    }
    let cal = RideCalendar::new(&case.rides, periods);
    for n in 0..slots {
        for t in 0..periods {
            let mut terms = vec![(state.at(&[n, in_use, t]), 1.0)];
            terms.extend(cal.active[t].iter().map(|&r| (use_.at(&[n, r]), -1.0)));
            p.add_eq(tags::IN_USE, terms, 0.0);
        }
    }
}

/// Power limits, station sums, state of charge and away charging.
pub fn add_ev_operation_constraints(model: &mut ModelInstance, case: &CaseBundle) {
    let v2g = model.spec.v2g;
    let v2g_cap = model.spec.has_v2g_cap();
    let reg = &model.registry;
    let p = &mut model.program;
    let k = case.ev_catalog.len();
    let slots = case.fleet_slots;
    let s_len = case.cs_slots;
    let periods = case.periods();
    let dt = case.grid.step_hours;
    let p_ev = reg.p_ev.as_ref().expect("provider model");
    let state = reg.state.as_ref().expect("provider model");
    let p_cs = reg.p_cs.as_ref().expect("provider model");
    let cs = reg.cs_invest.as_ref().expect("provider model");
    let soc = reg.soc.as_ref().expect("provider model");
    let use_ = reg.ride_use.as_ref().expect("provider model");
    let away = reg.e_away.as_ref().expect("provider model");
    let pev_max = case.max_ev_power();
    let ev_power = |j: usize| case.ev_catalog[j].power_kw;
    let ev_cap = |j: usize| case.ev_catalog[j].capacity_kwh;

    for n in 0..slots {
        for s in 0..s_len {
            for t in 0..periods {
                let x = p_ev.at(&[n, s, t]);
                let mut rated = vec![(x, 1.0)];
                rated.extend(ev_sum(reg, n, |j| -ev_power(j), k));
                p.add_le(tags::EV_POWER, rated, 0.0);
                if v2g {
                    let mut rated = vec![(x, 1.0)];
                    rated.extend(ev_sum(reg, n, ev_power, k));
                    p.add_ge(tags::EV_POWER, rated, 0.0);
                }
                let plug = state.at(&[n, s, t]);
                p.add_le(tags::EV_POWER, vec![(x, 1.0), (plug, -pev_max)], 0.0);
                if v2g {
                    p.add_ge(tags::EV_POWER, vec![(x, 1.0), (plug, pev_max)], 0.0);
                }
            }
        }
    }

    let locs = reg.cs_locations.clone();
    for s in 0..s_len {
        for t in 0..periods {
            let mut terms: Vec<(ColId, f64)> =
                (0..locs.len()).map(|l| (p_cs.at(&[s, l, t]), 1.0)).collect();
            terms.extend((0..slots).map(|n| (p_ev.at(&[n, s, t]), -1.0)));
            p.add_eq(tags::STATION_SUM, terms, 0.0);
        }
    }
    for s in 0..s_len {
        for (l, &bus) in locs.iter().enumerate() {
            for t in 0..periods {
                let x = p_cs.at(&[s, l, t]);
                let rating: Vec<(ColId, f64)> = case
                    .cs_catalog
                    .iter()
                    .enumerate()
                    .map(|(c, m)| (cs.at(&[s, bus, c]), m.power_kw))
                    .collect();
                let mut up = vec![(x, 1.0)];
                up.extend(rating.iter().map(|&(j, a)| (j, -a)));
                p.add_le(tags::STATION_POWER, up, 0.0);
                if v2g {
                    let mut down = vec![(x, 1.0)];
                    down.extend(rating.iter().copied());
                    p.add_ge(tags::STATION_POWER, down, 0.0);
                }
            }
        }
    }

    let cal = RideCalendar::new(&case.rides, periods);
    for n in 0..slots {
        for t in 0..periods {
            let mut terms = vec![(soc.at(&[n, t]), 1.0)];
            if case.grid.is_block_start(t) {
                terms.extend(ev_sum(reg, n, |j| -ev_cap(j), k));
            } else {
                terms.push((soc.at(&[n, t - 1]), -1.0));
            }
            terms.extend((0..s_len).map(|s| (p_ev.at(&[n, s, t]), -dt)));
            for &r in &cal.returning[t] {
                terms.push((use_.at(&[n, r]), case.rides[r].energy_kwh));
                terms.push((away.at(&[n, r]), -1.0));
            }
            p.add_eq(tags::SOC_RECURSION, terms, 0.0);
        }
    }
    let (a_min, a_dep) = (case.finance.soc_floor, case.finance.soc_departure);
    for n in 0..slots {
        for t in 0..periods {
            let x = soc.at(&[n, t]);
            let mut up = vec![(x, 1.0)];
            up.extend(ev_sum(reg, n, |j| -ev_cap(j), k));
            p.add_le(tags::SOC_BOUNDS, up, 0.0);
            let mut down = vec![(x, 1.0)];
            down.extend(ev_sum(reg, n, |j| -a_min * ev_cap(j), k));
            p.add_ge(tags::SOC_BOUNDS, down, 0.0);
        }
    }
    let big_m = case.max_ev_capacity();
    for n in 0..slots {
        for (r, ride) in case.rides.iter().enumerate() {
            let mut terms = vec![(soc.at(&[n, ride.departure]), 1.0)];
            terms.extend(ev_sum(reg, n, |j| -a_dep * ev_cap(j), k));
            terms.push((use_.at(&[n, r]), -big_m));
            p.add_ge(tags::DEPARTURE_SOC, terms, -big_m);
        }
    }
    for n in 0..slots {
        for (r, ride) in case.rides.iter().enumerate() {
            let cap = away_energy_cap(ride, case.away_power_kw, dt);
            p.add_le(
                tags::AWAY_CAP,
                vec![(away.at(&[n, r]), 1.0), (use_.at(&[n, r]), -cap)],
                0.0,
            );
        }
    }

    if v2g_cap {
        let d = reg.discharge.as_ref().expect("discharge block under v2g cap");
        for n in 0..slots {
            for s in 0..s_len {
                for t in 0..periods {
                    p.add_ge(
                        tags::V2G_CAP,
                        vec![(d.at(&[n, s, t]), 1.0), (p_ev.at(&[n, s, t]), 1.0)],
                        0.0,
                    );
                }
            }
        }
        let load = case.total_load();
        for (t, &l) in load.iter().enumerate() {
            let terms = (0..slots)
                .flat_map(|n| (0..s_len).map(move |s| (n, s)))
                .map(|(n, s)| (d.at(&[n, s, t]), 1.0))
                .collect();
            p.add_le(tags::V2G_CAP, terms, l);
        }
    }
}

/// Bus injections and the slack exchange split into imports and exports.
pub fn add_power_balance(model: &mut ModelInstance, case: &CaseBundle) {
    let reg = &model.registry;
    let p = &mut model.program;
    let periods = case.periods();
    let i_sup = reg.i_sup.as_ref().expect("supply block");
    let e_sup = reg.e_sup.as_ref().expect("supply block");

    if !model.spec.has_network() {
        let p_cs = reg.p_cs.as_ref().expect("provider model");
        for t in 0..periods {
            let mut terms = vec![(i_sup.at(&[t]), 1.0), (e_sup.at(&[t]), -1.0)];
            for s in 0..case.cs_slots {
                for l in 0..reg.cs_locations.len() {
                    terms.push((p_cs.at(&[s, l, t]), -1.0));
                }
            }
            p.add_eq(tags::SLACK_EXCHANGE, terms, 0.0);
        }
        return;
    }

    let load = case.bus_load();
    let p_inj = reg.p_inj.as_ref().expect("network model");
    for b in 0..case.network.bus_count() {
        let pv = reg.pv_index(b);
        let loc = reg.location_index(b);
        for t in 0..periods {
            let mut terms = vec![(p_inj.at(&[b, t]), 1.0)];
            if let (Some(j), Some(block)) = (pv, reg.p_pv.as_ref()) {
                terms.push((block.at(&[j, t]), -1.0));
            }
            if let (Some(l), Some(block)) = (loc, reg.p_cs.as_ref()) {
                terms.extend((0..case.cs_slots).map(|s| (block.at(&[s, l, t]), 1.0)));
            }
            p.add_eq(tags::BUS_INJECTION, terms, -load[b][t]);
        }
    }
    let p_slack = reg.p_slack.as_ref().expect("network model");
    for t in 0..periods {
        p.add_eq(
            tags::SLACK_EXCHANGE,
            vec![
                (p_slack.at(&[t]), 1.0),
                (i_sup.at(&[t]), -1.0),
                (e_sup.at(&[t]), 1.0),
            ],
            0.0,
        );
    }
}

/// Branch-flow balances, voltage drops and the rotated-cone current law.
pub fn add_distflow_constraints(model: &mut ModelInstance, case: &CaseBundle) {
    let reg = &model.registry;
    let p = &mut model.program;
    let net = &case.network;
    let periods = case.periods();
    let inv_base = 1.0 / net.base_power_kva;
    let children = net.children_lists();
    let p_line = reg.p_line.as_ref().expect("network model");
    let q_line = reg.q_line.as_ref().expect("network model");
    let i_sqr = reg.i_sqr.as_ref().expect("network model");
    let v_sqr = reg.v_sqr.as_ref().expect("network model");
    let p_inj = reg.p_inj.as_ref().expect("network model");
    let q_inj = reg.q_inj.as_ref().expect("network model");
    let p_slack = reg.p_slack.as_ref().expect("network model");
    let q_slack = reg.q_slack.as_ref().expect("network model");

    for (flow, inj, slack, tag, imp) in [
        (p_line, p_inj, p_slack, tags::ACTIVE_BALANCE, true),
        (q_line, q_inj, q_slack, tags::REACTIVE_BALANCE, false),
    ] {
        for b in 0..net.bus_count() {
            let z = if b == RadialNetwork::SLACK {
                0.0
            } else if imp {
                net.r_pu(b)
            } else {
                net.x_pu(b)
            };
            for t in 0..periods {
                let mut terms = vec![(inj.at(&[b, t]), inv_base)];
                if b == RadialNetwork::SLACK {
                    terms.push((slack.at(&[t]), inv_base));
                } else {
                    terms.push((flow.at(&[b - 1, t]), 1.0));
                    terms.push((i_sqr.at(&[b - 1, t]), -z));
                }
                terms.extend(children[b].iter().map(|&c| (flow.at(&[c - 1, t]), -1.0)));
                p.add_eq(tag, terms, 0.0);
            }
        }
    }
    for b in net.line_buses() {
        let a = net.parent(b).expect("line bus has a parent");
        let (r, x) = (net.r_pu(b), net.x_pu(b));
        let l = b - 1;
        for t in 0..periods {
            p.add_eq(
                tags::VOLTAGE_DROP,
                vec![
                    (v_sqr.at(&[b, t]), 1.0),
                    (v_sqr.at(&[a, t]), -1.0),
                    (p_line.at(&[l, t]), 2.0 * r),
                    (q_line.at(&[l, t]), 2.0 * x),
                    (i_sqr.at(&[l, t]), -(r * r + x * x)),
                ],
                0.0,
            );
        }
    }
    for b in net.line_buses() {
        let a = net.parent(b).expect("line bus has a parent");
        let l = b - 1;
        for t in 0..periods {
            p.add_cone(RotatedCone {
                current: i_sqr.at(&[l, t]),
                voltage: v_sqr.at(&[a, t]),
                p: p_line.at(&[l, t]),
                q: q_line.at(&[l, t]),
                key: cone_key(b, t),
                tag: tags::CONE,
            });
        }
    }
}

/// Identifies the cone of the line feeding `bus` at period `t` across models.
pub fn cone_key(bus: usize, t: usize) -> u64 {
    ((bus as u64) << 32) | t as u64
}

/// Transformer limit on the slack exchange, or the provider's headroom.
pub fn add_transformer_bound(model: &mut ModelInstance, case: &CaseBundle) {
    let reg = &model.registry;
    let p = &mut model.program;
    let rating = case.network.transformer_kw;
    match &model.spec.scope {
        ModelScope::ProviderOnly { community_slack_kw } => {
            let i_sup = reg.i_sup.as_ref().expect("supply block");
            for (t, &ec) in community_slack_kw.iter().enumerate() {
                let head = (rating - ec).max(0.0);
                p.add_row(tags::TRANSFORMER, vec![(i_sup.at(&[t]), 1.0)], 0.0, head);
            }
        }
        _ => {
            let slack = reg.p_slack.as_ref().expect("network model");
            for t in 0..case.periods() {
                p.add_row(tags::TRANSFORMER, vec![(slack.at(&[t]), 1.0)], -rating, rating);
            }
        }
    }
}

/// Annualised investment, fleet, mobility and supply costs (€/year).
pub fn add_objective(model: &mut ModelInstance, case: &CaseBundle) {
    let reg = &model.registry;
    let p = &mut model.program;
    let u = model.annuity_factor;
    let ann = model.annualization;
    let dt = case.grid.step_hours;
    let tar = &case.tariffs;

    if let Some(ev) = &reg.ev_invest {
        for n in 0..case.fleet_slots {
            for (k, m) in case.ev_catalog.iter().enumerate() {
                p.add_cost(ev.at(&[n, k]), u * m.price_eur + m.annual_fixed_eur);
            }
        }
    }
    if let Some(cs) = &reg.cs_invest {
        for s in 0..case.cs_slots {
            for b in 0..case.network.bus_count() {
                for (c, m) in case.cs_catalog.iter().enumerate() {
                    p.add_cost(cs.at(&[s, b, c]), u * m.price_eur);
                }
            }
        }
    }
    if let (Some(away), Some(use_)) = (&reg.e_away, &reg.ride_use) {
        for n in 0..case.fleet_slots {
            for (r, ride) in case.rides.iter().enumerate() {
                p.add_cost(away.at(&[n, r]), ann * tar.away_price);
                p.add_cost(use_.at(&[n, r]), -ann * tar.unserved_price * ride.energy_kwh);
            }
        }
        p.objective_offset += ann * tar.unserved_price * case.total_ride_demand();
    }
    let mode = model.spec.peak.fee_mode();
    let i_sup = reg.i_sup.as_ref().expect("supply block");
    let e_sup = reg.e_sup.as_ref().expect("supply block");
    for t in 0..case.periods() {
        p.add_cost(i_sup.at(&[t]), ann * dt * tar.effective_import_price(t, mode));
        p.add_cost(e_sup.at(&[t]), -ann * dt * tar.export_price[t]);
    }
}

/// Capacity-tariff epigraphs: per-bus import peaks or one collective peak.
pub fn add_peak_tariff(model: &mut ModelInstance, case: &CaseBundle) {
    let reg = &model.registry;
    let p = &mut model.program;
    let fee = case.tariffs.peak_fee;
    if let Some(peaks) = &reg.peak_bus {
        let p_inj = reg.p_inj.as_ref().expect("network model");
        for b in 0..case.network.bus_count() {
            let pk = peaks.at(&[b]);
            p.add_cost(pk, fee);
            for t in 0..case.periods() {
                p.add_ge(tags::PEAK, vec![(pk, 1.0), (p_inj.at(&[b, t]), 1.0)], 0.0);
            }
        }
    }
    if let Some(peak) = &reg.peak_coll {
        let pk = peak.at(&[0]);
        p.add_cost(pk, fee);
        let i_sup = reg.i_sup.as_ref().expect("supply block");
        for t in 0..case.periods() {
            p.add_ge(tags::PEAK, vec![(pk, 1.0), (i_sup.at(&[t]), -1.0)], 0.0);
        }
    }
}

/// Plain-text dump, one item per line:
///
/// ```text
/// col  <j> <name> <lower> <upper> <int|cont> <cost>
/// row  <i> <tag> <lower> <upper> <coef>*<name> ...
/// cone <k> <tag> <key> <i-name> <v-name> <p-name> <q-name>
/// offset <constant>
/// ```
pub fn write_model_dump(model: &ModelInstance, out: &mut dyn Write) -> std::io::Result<()> {
    let reg = &model.registry;
    let prog = &model.program;
    writeln!(out, "# fleetplan model: {} columns, {} rows, {} cones", prog.num_columns(), prog.rows.len(), prog.cones.len())?;
    for (j, c) in prog.columns.iter().enumerate() {
        writeln!(
            out,
            "col {j} {} {} {} {} {}",
            reg.describe(j),
            c.lower,
            c.upper,
            if c.integer { "int" } else { "cont" },
            c.cost
        )?;
    }
    for (i, r) in prog.rows.iter().enumerate() {
        write!(out, "row {i} {} {} {}", r.tag, r.lower, r.upper)?;
        for &(j, a) in &r.terms {
            write!(out, " {a}*{}", reg.describe(j))?;
        }
        writeln!(out)?;
    }
    for (k, c) in prog.cones.iter().enumerate() {
        writeln!(
            out,
            "cone {k} {} {} {} {} {} {}",
            c.tag,
            c.key,
            reg.describe(c.current),
            reg.describe(c.voltage),
            reg.describe(c.p),
            reg.describe(c.q)
        )?;
    }
    writeln!(out, "offset {}", prog.objective_offset)
}

