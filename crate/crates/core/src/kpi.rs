//! Yearly economic, energy, grid and mobility indicators of a scenario,
//! computed from raw variable values rather than from the objective.

use serde::{Deserialize, Serialize};

use crate::config::{PeakTariff, ScenarioConfig};
use crate::domain::CaseBundle;
use crate::scenario::SolvedPart;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvChoice {
    pub slot: usize,
    pub model: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsChoice {
    pub slot: usize,
    pub bus: usize,
    pub model: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Investment {
    pub evs: Vec<EvChoice>,
    pub stations: Vec<CsChoice>,
}

impl Investment {
    /// "2 x Nissan Leaf", or "none".
    pub fn fleet_summary(&self) -> String {
        summarize(self.evs.iter().map(|e| e.model.clone()))
    }

    /// "1 x Medium AC @ bus 0", or "none".
    pub fn station_summary(&self) -> String {
        summarize(self.stations.iter().map(|s| format!("{} @ bus {}", s.model, s.bus)))
    }
}

fn summarize(items: impl Iterator<Item = String>) -> String {
    let mut counts: Vec<(String, usize)> = Vec::new();
    for item in items {
        match counts.iter_mut().find(|(name, _)| *name == item) {
            Some((_, n)) => *n += 1,
            None => counts.push((item, 1)),
        }
    }
    if counts.is_empty() {
        return "none".into();
    }
    counts
        .iter()
        .map(|(name, n)| format!("{n} x {name}"))
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Costs in €/year, energies per year unless the unit says otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpiRecord {
    pub scenario: String,
    pub config_hash: String,
    pub case_hash: String,
    pub peak_tariff: PeakTariff,
    pub discount_rate: f64,
    pub away_power_kw: f64,

    /// C^EC + C^MSP as optimized; includes variable peak charges.
    pub total_cost: f64,
    /// `total_cost` plus the flat tariff's fixed yearly charge.
    pub overall_cost: f64,
    pub annuity: f64,
    pub fleet_fixed_cost: f64,
    pub away_cost: f64,
    pub unserved_cost: f64,
    pub supply_cost: f64,
    pub supply_revenue: f64,
    pub peak_cost: f64,

    pub pv_mwh: f64,
    pub import_mwh: f64,
    pub export_mwh: f64,
    /// Household load, net deposit charging and line losses.
    pub consumption_mwh: f64,
    pub local_mwh: f64,
    pub self_sufficiency: f64,
    pub local_pv_share: f64,

    pub max_import_kw: f64,
    pub max_export_kw: f64,
    pub losses_kwh: f64,

    pub served_mwh: f64,
    pub unserved_kwh: f64,
    pub away_kwh: f64,

    pub investment: Investment,
}

/// One numeric KPI: key, report section, label, unit and accessors.
pub struct KpiField {
    pub key: &'static str,
    pub section: Section,
    pub label: &'static str,
    pub unit: &'static str,
    pub get: fn(&KpiRecord) -> f64,
    pub set: fn(&mut KpiRecord, f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Section {
    Economic,
    Energy,
    Grid,
    ShortTerm,
}

macro_rules! field {
    ($key:ident, $section:ident, $label:expr, $unit:expr) => {
        KpiField {
            key: stringify!($key),
            section: Section::$section,
            label: $label,
            unit: $unit,
            get: |r| r.$key,
            set: |r, v| r.$key = v,
        }
    };
}

pub const FIELDS: &[KpiField] = &[
    field!(total_cost, Economic, "C^EC+C^MSP", "€/year"),
    field!(overall_cost, Economic, "C^EC+C^MSP incl. fixed peak charge", "€/year"),
    field!(annuity, Economic, "A", "€/year"),
    field!(fleet_fixed_cost, Economic, "f^EV", "€/year"),
    field!(away_cost, Economic, "C^away", "€/year"),
    field!(unserved_cost, Economic, "C^uns", "€/year"),
    field!(supply_cost, Economic, "C^sup", "€/year"),
    field!(supply_revenue, Economic, "R^sup", "€/year"),
    field!(peak_cost, Economic, "C^peak", "€/year"),
    field!(pv_mwh, Energy, "p^pv", "MWh/year"),
    field!(import_mwh, Energy, "i^sup", "MWh/year"),
    field!(export_mwh, Energy, "e^sup", "MWh/year"),
    field!(consumption_mwh, Energy, "consumption", "MWh/year"),
    field!(local_mwh, Energy, "p^loc", "MWh/year"),
    field!(self_sufficiency, Energy, "self-sufficiency", "-"),
    field!(local_pv_share, Energy, "local PV share", "-"),
    field!(max_import_kw, Grid, "max(i^sup)", "kW"),
    field!(max_export_kw, Grid, "max(e^sup)", "kW"),
    field!(losses_kwh, Grid, "p^loss", "kWh/year"),
    field!(served_mwh, ShortTerm, "e^use", "MWh/year"),
    field!(unserved_kwh, ShortTerm, "e^uns", "kWh/year"),
    field!(away_kwh, ShortTerm, "e^away", "kWh/year"),
    field!(discount_rate, Economic, "rho", "-"),
    field!(away_power_kw, ShortTerm, "P^away", "kW"),
];

pub fn field(key: &str) -> Option<&'static KpiField> {
    FIELDS.iter().find(|f| f.key == key)
}

impl KpiRecord {
    /// A record with every number zero, for parsers to fill in.
    pub fn blank(scenario: &str) -> Self {
        Self {
            scenario: scenario.into(),
            config_hash: String::new(),
            case_hash: String::new(),
            peak_tariff: PeakTariff::NoneFixed,
            discount_rate: 0.0,
            away_power_kw: 0.0,
            total_cost: 0.0,
            overall_cost: 0.0,
            annuity: 0.0,
            fleet_fixed_cost: 0.0,
            away_cost: 0.0,
            unserved_cost: 0.0,
            supply_cost: 0.0,
            supply_revenue: 0.0,
            peak_cost: 0.0,
            pv_mwh: 0.0,
            import_mwh: 0.0,
            export_mwh: 0.0,
            consumption_mwh: 0.0,
            local_mwh: 0.0,
            self_sufficiency: 0.0,
            local_pv_share: 0.0,
            max_import_kw: 0.0,
            max_export_kw: 0.0,
            losses_kwh: 0.0,
            served_mwh: 0.0,
            unserved_kwh: 0.0,
            away_kwh: 0.0,
            investment: Investment::default(),
        }
    }

    pub fn numbers(&self) -> Vec<(&'static str, f64)> {
        FIELDS.iter().map(|f| (f.key, (f.get)(self))).collect()
    }
}

/// Per-period and per-ride quantities gathered over the parts of a run.
#[derive(Clone, Debug, Default)]
pub struct Flows {
    pub imports_kw: Vec<f64>,
    pub exports_kw: Vec<f64>,
    pub pv_kw: Vec<f64>,
    pub charging_kw: Vec<f64>,
    pub losses_kw: Vec<f64>,
    /// Yearly import peak per bus (kW), from the bus injections.
    pub bus_import_peak_kw: Vec<f64>,
    pub served_by_ride: Vec<f64>,
    pub away_by_ride: Vec<f64>,
}

pub fn collect_flows(case: &CaseBundle, parts: &[SolvedPart]) -> Flows {
    let t_len = case.periods();
    let buses = case.network.bus_count();
    let mut f = Flows {
        imports_kw: vec![0.0; t_len],
        exports_kw: vec![0.0; t_len],
        pv_kw: vec![0.0; t_len],
        charging_kw: vec![0.0; t_len],
        losses_kw: vec![0.0; t_len],
        bus_import_peak_kw: vec![0.0; buses],
        served_by_ride: vec![0.0; case.rides.len()],
        away_by_ride: vec![0.0; case.rides.len()],
    };
    for part in parts {
        let reg = &part.model.registry;
        let x = &part.solution.values;
        let i_sup = reg.i_sup.as_ref().expect("supply block");
        let e_sup = reg.e_sup.as_ref().expect("supply block");
        for t in 0..t_len {
            f.imports_kw[t] += x[i_sup.at(&[t])];
            f.exports_kw[t] += x[e_sup.at(&[t])];
        }
        if let Some(pv) = &reg.p_pv {
            for j in 0..reg.pv_buses.len() {
                for t in 0..t_len {
                    f.pv_kw[t] += x[pv.at(&[j, t])];
                }
            }
        }
        if let Some(p_cs) = &reg.p_cs {
            for s in 0..case.cs_slots {
                for l in 0..reg.cs_locations.len() {
                    for t in 0..t_len {
                        f.charging_kw[t] += x[p_cs.at(&[s, l, t])];
                    }
                }
            }
        }
        if let Some(i_sqr) = &reg.i_sqr {
            let base = case.network.base_power_kva;
            for b in case.network.line_buses() {
                let r = case.network.r_pu(b);
                for t in 0..t_len {
                    f.losses_kw[t] += r * x[i_sqr.at(&[b - 1, t])] * base;
                }
            }
        }
        if let Some(p_inj) = &reg.p_inj {
            for b in 0..buses {
                let peak = (0..t_len).map(|t| -x[p_inj.at(&[b, t])]).fold(0.0, f64::max);
                f.bus_import_peak_kw[b] = f.bus_import_peak_kw[b].max(peak);
            }
        }
        if let (Some(use_), Some(away)) = (&reg.ride_use, &reg.e_away) {
            for n in 0..case.fleet_slots {
                for r in 0..case.rides.len() {
                    f.served_by_ride[r] += x[use_.at(&[n, r])];
                    f.away_by_ride[r] += x[away.at(&[n, r])];
                }
            }
        }
    }
    f
}

pub fn investment_of(case: &CaseBundle, parts: &[SolvedPart]) -> Investment {
    let mut inv = Investment::default();
    for part in parts {
        let reg = &part.model.registry;
        let x = &part.solution.values;
        if let Some(ev) = &reg.ev_invest {
            for n in 0..case.fleet_slots {
                for (k, m) in case.ev_catalog.iter().enumerate() {
                    if x[ev.at(&[n, k])] > 0.5 {
                        inv.evs.push(EvChoice { slot: n, model: m.name.clone() });
                    }
                }
            }
        }
        if let Some(cs) = &reg.cs_invest {
            for s in 0..case.cs_slots {
                for b in 0..case.network.bus_count() {
                    for (c, m) in case.cs_catalog.iter().enumerate() {
                        if x[cs.at(&[s, b, c])] > 0.5 {
                            inv.stations.push(CsChoice { slot: s, bus: b, model: m.name.clone() });
                        }
                    }
                }
            }
        }
    }
    inv
}

pub fn compute_kpis(case: &CaseBundle, cfg: &ScenarioConfig, parts: &[SolvedPart]) -> KpiRecord {
    let f = collect_flows(case, parts);
    let inv = investment_of(case, parts);
    let ann = case.grid.annualization_factor();
    let dt = case.grid.step_hours;
    let tar = &case.tariffs;
    let mode = cfg.peak_tariff.fee_mode();
    let u = crate::domain::capital_recovery_factor(case.finance.discount_rate, case.finance.horizon_years)
        .unwrap_or(f64::NAN);

    let ev_price = |name: &str| case.ev_catalog.iter().find(|m| m.name == name).expect("catalog model");
    let cs_price = |name: &str| case.cs_catalog.iter().find(|m| m.name == name).expect("catalog model");
    let capex: f64 = inv.evs.iter().map(|e| ev_price(&e.model).price_eur).sum::<f64>()
        + inv.stations.iter().map(|s| cs_price(&s.model).price_eur).sum::<f64>();
    let annuity = u * capex;
    let fleet_fixed_cost: f64 = inv.evs.iter().map(|e| ev_price(&e.model).annual_fixed_eur).sum();

    let away_kwh = ann * f.away_by_ride.iter().sum::<f64>();
    let unserved: f64 = case
        .rides
        .iter()
        .zip(&f.served_by_ride)
        .map(|(r, s)| r.energy_kwh * (1.0 - s))
        .sum();
    let served: f64 = case
        .rides
        .iter()
        .zip(&f.served_by_ride)
        .map(|(r, s)| r.energy_kwh * s)
        .sum();

    let supply_cost: f64 = (0..case.periods())
        .map(|t| ann * dt * tar.effective_import_price(t, mode) * f.imports_kw[t])
        .sum();
    let supply_revenue: f64 = (0..case.periods())
        .map(|t| ann * dt * tar.export_price[t] * f.exports_kw[t])
        .sum();
    let max_import_kw = f.imports_kw.iter().copied().fold(0.0, f64::max);
    let max_export_kw = f.exports_kw.iter().copied().fold(0.0, f64::max);
    let (peak_cost, variable_peak) = match cfg.peak_tariff {
        PeakTariff::NoneFixed => (tar.fixed_peak_charge, 0.0),
        PeakTariff::Collective => {
            let c = tar.peak_fee * max_import_kw;
            (c, c)
        }
        PeakTariff::Individual => {
            let c = tar.peak_fee * f.bus_import_peak_kw.iter().sum::<f64>();
            (c, c)
        }
    };

    let away_cost = tar.away_price * away_kwh;
    let unserved_cost = ann * tar.unserved_price * unserved;
    let total_cost =
        annuity + fleet_fixed_cost + away_cost + unserved_cost + supply_cost - supply_revenue + variable_peak;
    let overall_cost = if cfg.peak_tariff == PeakTariff::NoneFixed {
        total_cost + tar.fixed_peak_charge
    } else {
        total_cost
    };

    let mwh = |series: &[f64]| ann * dt * series.iter().sum::<f64>() / 1000.0;
    let household: f64 = case.total_load().iter().sum::<f64>();
    let consumption_mwh =
        ann * dt * (household + f.charging_kw.iter().sum::<f64>() + f.losses_kw.iter().sum::<f64>()) / 1000.0;
    let import_mwh = mwh(&f.imports_kw);
    let pv_mwh = mwh(&f.pv_kw);
    let local_mwh = consumption_mwh - import_mwh;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };

    KpiRecord {
        scenario: cfg.label(),
        config_hash: cfg.config_hash(),
        case_hash: crate::io::case_hash(case),
        peak_tariff: cfg.peak_tariff,
        discount_rate: case.finance.discount_rate,
        away_power_kw: case.away_power_kw,
        total_cost,
        overall_cost,
        annuity,
        fleet_fixed_cost,
        away_cost,
        unserved_cost,
        supply_cost,
        supply_revenue,
        peak_cost,
        pv_mwh,
        import_mwh,
        export_mwh: mwh(&f.exports_kw),
        consumption_mwh,
        local_mwh,
        self_sufficiency: ratio(local_mwh, consumption_mwh),
        local_pv_share: ratio(local_mwh, pv_mwh),
        max_import_kw,
        max_export_kw,
        losses_kwh: ann * dt * f.losses_kw.iter().sum::<f64>(),
        served_mwh: ann * served / 1000.0,
        unserved_kwh: ann * unserved,
        away_kwh,
        investment: inv,
    }
}
