//! Constraint-by-constraint audit of a solved part, recomputed from the case
//! data and raw variable values without touching the program rows.
//!
//! Residuals are in the units of each family: kW for power limits, kWh for
//! energy, p.u. for network balances and voltage drops, relative for cones
//! and the objective.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::PeakTariff;
use crate::domain::{away_energy_cap, capital_recovery_factor, CaseBundle, RadialNetwork};
use crate::formulation::{Block, ModelScope};
use crate::scenario::SolvedPart;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyCheck {
    pub max_residual: f64,
    pub checked: usize,
    /// Where the largest residual occurred.
    pub worst: String,
    /// Informational families (cone slack) do not decide the verdict.
    pub counted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub tolerance: f64,
    pub families: BTreeMap<String, FamilyCheck>,
    pub soc_replay_max_kwh: f64,
    pub unserved_identity_exact: bool,
    pub objective_reported: f64,
    pub objective_recomputed: f64,
}

impl AuditReport {
    pub fn failures(&self) -> Vec<(&str, &FamilyCheck)> {
        self.families
            .iter()
            .filter(|(_, f)| f.counted && !(f.max_residual <= self.tolerance))
            .map(|(k, f)| (k.as_str(), f))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty() && self.unserved_identity_exact
    }

    pub fn residual(&self, tag: &str) -> f64 {
        self.families.get(tag).map_or(0.0, |f| f.max_residual)
    }
}

struct Audit<'a> {
    x: &'a [f64],
    families: BTreeMap<String, FamilyCheck>,
}

impl Audit<'_> {
    fn v(&self, block: &Block, idx: &[usize]) -> f64 {
        self.x[block.at(idx)]
    }

    fn record(&mut self, tag: &str, residual: f64, at: impl FnOnce() -> String) {
        self.record_as(tag, residual, true, at);
    }

    fn record_as(&mut self, tag: &str, residual: f64, counted: bool, at: impl FnOnce() -> String) {
        let f = self.families.entry(tag.to_owned()).or_insert(FamilyCheck {
            max_residual: 0.0,
            checked: 0,
            worst: String::new(),
            counted,
        });
        f.checked += 1;
        let r = if residual.is_nan() { f64::INFINITY } else { residual.max(0.0) };
        if r > f.max_residual {
            f.max_residual = r;
            f.worst = at();
        }
    }

    /// lower ≤ value ≤ upper
    fn within(&mut self, tag: &str, value: f64, lower: f64, upper: f64, at: impl FnOnce() -> String) {
        self.record(tag, (lower - value).max(value - upper), at);
    }
}

pub fn verify_solution(case: &CaseBundle, part: &SolvedPart, tol: f64) -> AuditReport {
    let reg = &part.model.registry;
    let spec = &part.model.spec;
    let x = part.solution.values.as_slice();
    let mut a = Audit { x, families: BTreeMap::new() };
    let t_len = case.periods();
    let dt = case.grid.step_hours;
    let net = &case.network;
    let buses = net.bus_count();
    let slots = case.fleet_slots;
    let s_len = case.cs_slots;
    let rides = &case.rides;
    let mut soc_replay_max: f64 = 0.0;
    let mut unserved_exact = true;

    for block in [&reg.ev_invest, &reg.cs_invest, &reg.ride_use, &reg.state].into_iter().flatten() {
        for col in block.cols() {
            a.record("integrality", (x[col] - x[col].round()).abs(), || reg.describe(col));
        }
    }

    if let (Some(ev), Some(cs), Some(use_), Some(state), Some(p_ev), Some(soc), Some(p_cs), Some(away)) = (
        &reg.ev_invest,
        &reg.cs_invest,
        &reg.ride_use,
        &reg.state,
        &reg.p_ev,
        &reg.soc,
        &reg.p_cs,
        &reg.e_away,
    ) {
        let has_ev: Vec<f64> = (0..slots).map(|n| (0..case.ev_catalog.len()).map(|k| a.v(ev, &[n, k])).sum()).collect();
        let cap: Vec<f64> = (0..slots)
            .map(|n| case.ev_catalog.iter().enumerate().map(|(k, m)| m.capacity_kwh * a.v(ev, &[n, k])).sum())
            .collect();
        let rating: Vec<f64> = (0..slots)
            .map(|n| case.ev_catalog.iter().enumerate().map(|(k, m)| m.power_kw * a.v(ev, &[n, k])).sum())
            .collect();
        let pev_max = case.max_ev_power();
        for n in 0..slots {
            a.record("5", has_ev[n] - 1.0, || format!("slot {n}"));
        }
        for s in 0..s_len {
            let mut sum = 0.0;
            for b in 0..buses {
                for c in 0..case.cs_catalog.len() {
                    let d = a.v(cs, &[s, b, c]);
                    sum += d;
                    if !reg.cs_locations.contains(&b) {
                        a.record("6", d.abs(), || format!("station {s} at disallowed bus {b}"));
                    }
                }
            }
            a.record("6", sum - 1.0, || format!("station {s}"));
        }
        let station_on: Vec<f64> = (0..s_len)
            .map(|s| (0..buses).flat_map(|b| (0..case.cs_catalog.len()).map(move |c| (b, c))).map(|(b, c)| a.v(cs, &[s, b, c])).sum())
            .collect();

        for r in 0..rides.len() {
            let total: f64 = (0..slots).map(|n| a.v(use_, &[n, r])).sum();
            a.record("7", total - 1.0, || format!("ride {r}"));
            for n in 0..slots {
                a.record("8", a.v(use_, &[n, r]) - has_ev[n], || format!("slot {n} ride {r}"));
            }
        }
        for r1 in 0..rides.len() {
            for r2 in r1 + 1..rides.len() {
                if rides[r1].departure <= rides[r2].ret && rides[r2].departure <= rides[r1].ret {
                    for n in 0..slots {
                        let both = a.v(use_, &[n, r1]) + a.v(use_, &[n, r2]);
                        a.record("9", both - 1.0, || format!("slot {n} rides {r1},{r2}"));
                    }
                }
            }
        }
        for n in 0..slots {
            for t in 0..t_len {
                let states: f64 = (0..=s_len).map(|s| a.v(state, &[n, s, t])).sum();
                a.record("10", states - has_ev[n], || format!("slot {n} t {t}"));
                for s in 0..s_len {
                    a.record("11", a.v(state, &[n, s, t]) - station_on[s], || format!("slot {n} station {s} t {t}"));
                }
                let active: f64 = rides
                    .iter()
                    .enumerate()
                    .filter(|(_, ride)| ride.departure <= t && t <= ride.ret)
                    .map(|(r, _)| a.v(use_, &[n, r]))
                    .sum();
                a.record("12", (a.v(state, &[n, s_len, t]) - active).abs(), || format!("slot {n} t {t}"));
            }
        }

        for n in 0..slots {
            for s in 0..s_len {
                for t in 0..t_len {
                    let p = a.v(p_ev, &[n, s, t]);
                    let lo = if spec.v2g { -1.0 } else { 0.0 };
                    let plug = a.v(state, &[n, s, t]);
                    a.within("13", p, lo * rating[n], rating[n], || format!("slot {n} station {s} t {t} rating"));
                    a.within("13", p, lo * pev_max * plug, pev_max * plug, || format!("slot {n} station {s} t {t} plug"));
                }
            }
        }
        for s in 0..s_len {
            for t in 0..t_len {
                let at_stations: f64 = (0..reg.cs_locations.len()).map(|l| a.v(p_cs, &[s, l, t])).sum();
                let cars: f64 = (0..slots).map(|n| a.v(p_ev, &[n, s, t])).sum();
                a.record("14", (at_stations - cars).abs(), || format!("station {s} t {t}"));
                for (l, &bus) in reg.cs_locations.iter().enumerate() {
                    let limit: f64 = case.cs_catalog.iter().enumerate().map(|(c, m)| m.power_kw * a.v(cs, &[s, bus, c])).sum();
                    let lo = if spec.v2g { -limit } else { 0.0 };
                    a.within("15", a.v(p_cs, &[s, l, t]), lo, limit, || format!("station {s} bus {bus} t {t}"));
                }
            }
        }

        let (a_min, a_dep) = (case.finance.soc_floor, case.finance.soc_departure);
        for n in 0..slots {
            let mut replay = 0.0;
            for t in 0..t_len {
                let prev = if case.grid.is_block_start(t) { cap[n] } else { a.v(soc, &[n, t - 1]) };
                let replay_prev = if case.grid.is_block_start(t) { cap[n] } else { replay };
                let mut delta: f64 = (0..s_len).map(|s| a.v(p_ev, &[n, s, t]) * dt).sum();
                for (r, ride) in rides.iter().enumerate() {
                    if ride.ret == t {
                        delta += a.v(away, &[n, r]) - ride.energy_kwh * a.v(use_, &[n, r]);
                    }
                }
                let s_t = a.v(soc, &[n, t]);
                a.record("16", (s_t - prev - delta).abs(), || format!("slot {n} t {t}"));
                replay = replay_prev + delta;
                soc_replay_max = soc_replay_max.max((replay - s_t).abs());
                a.within("17", s_t, a_min * cap[n], cap[n], || format!("slot {n} t {t}"));
            }
            for (r, ride) in rides.iter().enumerate() {
                if a.v(use_, &[n, r]) > 0.5 {
                    let s_dep = a.v(soc, &[n, ride.departure]);
                    a.record("18", a_dep * cap[n] - s_dep, || format!("slot {n} ride {r}"));
                }
                let limit = away_energy_cap(ride, case.away_power_kw, dt) * a.v(use_, &[n, r]);
                a.within("19", a.v(away, &[n, r]), 0.0, limit, || format!("slot {n} ride {r}"));
            }
        }
        a.record("soc-replay", soc_replay_max, || "largest drift over all slots".into());

        for (r, ride) in rides.iter().enumerate() {
            let served: f64 = (0..slots).map(|n| a.v(use_, &[n, r])).sum();
            let identity = ride.energy_kwh * (1.0 - served);
            let direct = if (0..slots).any(|n| a.v(use_, &[n, r]) == 1.0) { 0.0 } else { ride.energy_kwh };
            if identity != direct {
                unserved_exact = false;
            }
        }

        if let Some(d) = &reg.discharge {
            let load = case.total_load();
            for t in 0..t_len {
                let mut total = 0.0;
                for n in 0..slots {
                    for s in 0..s_len {
                        let dv = a.v(d, &[n, s, t]);
                        total += dv;
                        a.record("v2g-cap", (-a.v(p_ev, &[n, s, t]) - dv).max(-dv), || format!("slot {n} station {s} t {t}"));
                    }
                }
                a.record("v2g-cap", total - load[t], || format!("t {t}"));
            }
        }
    }

    let i_sup = reg.i_sup.as_ref().expect("supply block");
    let e_sup = reg.e_sup.as_ref().expect("supply block");
    for t in 0..t_len {
        a.record("21", -a.v(i_sup, &[t]), || format!("i_sup t {t}"));
        a.record("21", -a.v(e_sup, &[t]), || format!("e_sup t {t}"));
    }
    match &spec.scope {
        ModelScope::ProviderOnly { community_slack_kw } => {
            let p_cs = reg.p_cs.as_ref().expect("provider");
            for t in 0..t_len {
                let charge: f64 = (0..s_len)
                    .flat_map(|s| (0..reg.cs_locations.len()).map(move |l| (s, l)))
                    .map(|(s, l)| a.v(p_cs, &[s, l, t]))
                    .sum();
                let exch = a.v(i_sup, &[t]) - a.v(e_sup, &[t]);
                a.record("21", (exch - charge).abs(), || format!("t {t}"));
                let head = (net.transformer_kw - community_slack_kw[t]).max(0.0);
                a.within("28", a.v(i_sup, &[t]), 0.0, head, || format!("t {t}"));
            }
        }
        _ => audit_network(&mut a, case, part),
    }

    if let Some(peaks) = &reg.peak_bus {
        let p_inj = reg.p_inj.as_ref().expect("network");
        for b in 0..buses {
            for t in 0..t_len {
                a.record("peak", -a.v(p_inj, &[b, t]) - a.v(peaks, &[b]), || format!("bus {b} t {t}"));
            }
        }
    }
    if let Some(peak) = &reg.peak_coll {
        for t in 0..t_len {
            a.record("peak", a.v(i_sup, &[t]) - a.v(peak, &[0]), || format!("t {t}"));
        }
    }

    let recomputed = recompute_objective(case, part);
    let reported = part.solution.objective;
    a.record("objective", (recomputed - reported).abs() / reported.abs().max(1.0), || {
        format!("recomputed {recomputed} vs reported {reported}")
    });

    AuditReport {
        tolerance: tol,
        families: a.families,
        soc_replay_max_kwh: soc_replay_max,
        unserved_identity_exact: unserved_exact,
        objective_reported: reported,
        objective_recomputed: recomputed,
    }
}

fn audit_network(a: &mut Audit<'_>, case: &CaseBundle, part: &SolvedPart) {
    let reg = &part.model.registry;
    let net = &case.network;
    let t_len = case.periods();
    let buses = net.bus_count();
    let load = case.bus_load();
    let q_load = case.bus_reactive_load();
    let pv_pot = case.bus_pv_potential();
    let inv = 1.0 / net.base_power_kva;
    let (p_inj, q_inj) = (reg.p_inj.as_ref().expect("network"), reg.q_inj.as_ref().expect("network"));
    let (p_line, q_line) = (reg.p_line.as_ref().expect("network"), reg.q_line.as_ref().expect("network"));
    let (i_sqr, v_sqr) = (reg.i_sqr.as_ref().expect("network"), reg.v_sqr.as_ref().expect("network"));
    let (p_slack, q_slack) = (reg.p_slack.as_ref().expect("network"), reg.q_slack.as_ref().expect("network"));
    let i_sup = reg.i_sup.as_ref().expect("supply block");
    let e_sup = reg.e_sup.as_ref().expect("supply block");
    let mut children = vec![Vec::new(); buses];
    for b in net.line_buses() {
        children[net.buses[b].parent.expect("line bus")].push(b);
    }

    for b in 0..buses {
        for t in 0..t_len {
            let pv = reg.pv_index(b).map_or(0.0, |j| a.v(reg.p_pv.as_ref().expect("pv"), &[j, t]));
            if reg.pv_index(b).is_some() {
                a.within("20", pv, 0.0, pv_pot[b][t], || format!("pv bus {b} t {t}"));
            }
            let cs: f64 = match (reg.location_index(b), &reg.p_cs) {
                (Some(l), Some(p_cs)) => (0..case.cs_slots).map(|s| a.v(p_cs, &[s, l, t])).sum(),
                _ => 0.0,
            };
            let expect = pv - load[b][t] - cs;
            a.record("20", (a.v(p_inj, &[b, t]) - expect).abs(), || format!("bus {b} t {t}"));
            let q_expect = -q_load[b][t];
            a.record("20", (a.v(q_inj, &[b, t]) - q_expect).abs(), || format!("reactive bus {b} t {t}"));
        }
    }
    for t in 0..t_len {
        let exch = a.v(i_sup, &[t]) - a.v(e_sup, &[t]);
        a.record("21", (a.v(p_slack, &[t]) - exch).abs(), || format!("t {t}"));
        a.within("28", a.v(p_slack, &[t]), -net.transformer_kw, net.transformer_kw, || format!("t {t}"));
    }

    for (tag, flow, inj, slack, active) in [("22", p_line, p_inj, p_slack, true), ("23", q_line, q_inj, q_slack, false)] {
        for b in 0..buses {
            for t in 0..t_len {
                let out: f64 = children[b].iter().map(|&c| a.v(flow, &[c - 1, t])).sum();
                let residual = if b == RadialNetwork::SLACK {
                    (a.v(inj, &[b, t]) + a.v(slack, &[t])) * inv - out
                } else {
                    let z = if active { net.r_pu(b) } else { net.x_pu(b) };
                    a.v(inj, &[b, t]) * inv + a.v(flow, &[b - 1, t]) - z * a.v(i_sqr, &[b - 1, t]) - out
                };
                a.record(tag, residual.abs(), || format!("bus {b} t {t}"));
            }
        }
    }
    for b in net.line_buses() {
        let parent = net.buses[b].parent.expect("line bus");
        let (r, xr) = (net.r_pu(b), net.x_pu(b));
        for t in 0..t_len {
            let l = b - 1;
            let (p, q, i) = (a.v(p_line, &[l, t]), a.v(q_line, &[l, t]), a.v(i_sqr, &[l, t]));
            let drop = a.v(v_sqr, &[parent, t]) - 2.0 * (r * p + xr * q) + (r * r + xr * xr) * i;
            a.record("24", (a.v(v_sqr, &[b, t]) - drop).abs(), || format!("bus {b} t {t}"));
            let flow = p * p + q * q;
            let iv = i * a.v(v_sqr, &[parent, t]);
            let scale = flow.max(1.0);
            a.record("25", (flow - iv) / scale, || format!("bus {b} t {t}"));
            a.record_as("25-slack", (iv - flow) / scale, false, || format!("bus {b} t {t}"));
            a.within("27", i, 0.0, net.amp_limit_sqr_pu(b), || format!("bus {b} t {t}"));
        }
    }
    for b in 0..buses {
        for t in 0..t_len {
            let v = a.v(v_sqr, &[b, t]);
            if b == RadialNetwork::SLACK {
                a.record("26", (v - 1.0).abs(), || format!("slack t {t}"));
            } else {
                a.within("26", v, net.v_min_sqr, net.v_max_sqr, || format!("bus {b} t {t}"));
            }
        }
    }
}

/// Cost of a part rebuilt from case prices and variable values.
pub fn recompute_objective(case: &CaseBundle, part: &SolvedPart) -> f64 {
    let reg = &part.model.registry;
    let x = part.solution.values.as_slice();
    let tar = &case.tariffs;
    let ann = case.grid.annualization_factor();
    let dt = case.grid.step_hours;
    let u = capital_recovery_factor(case.finance.discount_rate, case.finance.horizon_years).unwrap_or(f64::NAN);
    let mut cost = 0.0;
    if let (Some(ev), Some(cs), Some(use_), Some(away)) = (&reg.ev_invest, &reg.cs_invest, &reg.ride_use, &reg.e_away) {
        for n in 0..case.fleet_slots {
            for (k, m) in case.ev_catalog.iter().enumerate() {
                cost += x[ev.at(&[n, k])] * (u * m.price_eur + m.annual_fixed_eur);
            }
        }
        for s in 0..case.cs_slots {
            for b in 0..case.network.bus_count() {
                for (c, m) in case.cs_catalog.iter().enumerate() {
                    cost += x[cs.at(&[s, b, c])] * u * m.price_eur;
                }
            }
        }
        for (r, ride) in case.rides.iter().enumerate() {
            let served: f64 = (0..case.fleet_slots).map(|n| x[use_.at(&[n, r])]).sum();
            let away_kwh: f64 = (0..case.fleet_slots).map(|n| x[away.at(&[n, r])]).sum();
            cost += ann * (tar.unserved_price * ride.energy_kwh * (1.0 - served) + tar.away_price * away_kwh);
        }
    }
    let mode = part.model.spec.peak.fee_mode();
    let i_sup = reg.i_sup.as_ref().expect("supply block");
    let e_sup = reg.e_sup.as_ref().expect("supply block");
    for t in 0..case.periods() {
        cost += ann * dt * (tar.effective_import_price(t, mode) * x[i_sup.at(&[t])] - tar.export_price[t] * x[e_sup.at(&[t])]);
    }
    match part.model.spec.peak {
        PeakTariff::NoneFixed => {}
        PeakTariff::Individual => {
            if let Some(p) = &reg.peak_bus {
                cost += tar.peak_fee * p.values(x).iter().sum::<f64>();
            }
        }
        PeakTariff::Collective => {
            if let Some(p) = &reg.peak_coll {
                cost += tar.peak_fee * x[p.at(&[0])];
            }
        }
    }
    cost
}
