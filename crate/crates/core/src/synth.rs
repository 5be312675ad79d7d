//! Reproducible synthetic community: 21-bus feeder, household and PV
//! profiles, day-ahead-like prices and a ride book.
//!
//! Reference feeder: the slack (transformer) bus 0 sits in the middle of four
//! identical five-bus chains (buses 1–5, 6–10, 11–15, 16–20). The first
//! segment of each chain is 40 m, the others 30 m, all in a 4×95 mm² Al
//! cable (0.32 Ω/km, 0.08 Ω/km, 240 A). Every second bus along each chain
//! hosts a prosumer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    Bus, CaseBundle, CsCandidate, EvCandidate, FinanceParams, MemberProfile, RadialNetwork,
    RideRequest, TariffSchedule, TimeGrid,
};

const CHAINS: usize = 4;
const R_OHM_PER_KM: f64 = 0.32;
const X_OHM_PER_KM: f64 = 0.08;
const AMPACITY_A: f64 = 240.0;
const PERIODS_PER_DAY: usize = 96;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCaseParams {
    pub member_count: usize,
    pub prosumer_count: usize,
    pub ride_count: usize,
    /// Representative blocks (weeks by default).
    pub blocks: usize,
    pub days_per_block: usize,
    pub seed: u64,
    /// Hourly step of the price random walk (€/kWh).
    pub price_volatility: f64,
    /// Mean retail import price, grid fee included (€/kWh).
    pub mean_import_price: f64,
    /// Aggregated household peak per member (kW).
    pub peak_per_member_kw: f64,
    pub pv_peak_kw: f64,
    pub fleet_slots: usize,
    pub cs_slots: usize,
}

impl Default for SyntheticCaseParams {
    fn default() -> Self {
        Self {
            member_count: 20,
            prosumer_count: 10,
            ride_count: 88,
            blocks: 4,
            days_per_block: 7,
            seed: 7,
            price_volatility: 0.01,
            mean_import_price: 0.25,
            peak_per_member_kw: 2.5,
            pv_peak_kw: 5.5,
            fleet_slots: 3,
            cs_slots: 1,
        }
    }
}

impl SyntheticCaseParams {
    /// Two consecutive sunny days in one block, a handful of rides and two
    /// EV slots: small enough to solve exactly in a test run.
    pub fn desk() -> Self {
        Self {
            ride_count: 8,
            blocks: 1,
            days_per_block: 2,
            fleet_slots: 2,
            cs_slots: 1,
            ..Self::default()
        }
    }

    pub fn periods(&self) -> usize {
        self.blocks * self.days_per_block * PERIODS_PER_DAY
    }
}

/// EV models on offer (capacity kWh, power kW, price €, fixed €/year).
pub fn default_ev_catalog() -> Vec<EvCandidate> {
    vec![
        EvCandidate {
            name: "Nissan Leaf".into(),
            capacity_kwh: 40.0,
            power_kw: 11.0,
            price_eur: 9784.0,
            annual_fixed_eur: 1814.0,
        },
        EvCandidate {
            name: "Renault Megan".into(),
            capacity_kwh: 60.0,
            power_kw: 22.0,
            price_eur: 32149.0,
            annual_fixed_eur: 2237.0,
        },
    ]
}

/// Deposit charging stations on offer (power kW, price €).
pub fn default_cs_catalog() -> Vec<CsCandidate> {
    vec![
        CsCandidate {
            name: "Low AC".into(),
            power_kw: 3.7,
            price_eur: 760.0,
        },
        CsCandidate {
            name: "Medium AC".into(),
            power_kw: 11.0,
            price_eur: 1800.0,
        },
        CsCandidate {
            name: "High AC".into(),
            power_kw: 22.0,
            price_eur: 2300.0,
        },
    ]
}

/// Symmetric `1 + 4·chain_len` bus feeder described in the module docs.
pub fn reference_network(member_count: usize, transformer_kw: f64) -> RadialNetwork {
    let chain_len = member_count.div_ceil(CHAINS).max(1);
    let mut buses = vec![Bus {
        id: 0,
        parent: None,
        r_ohm: 0.0,
        x_ohm: 0.0,
        amp_limit_a: 0.0,
    }];
    for id in 1..=member_count {
        let pos = (id - 1) % chain_len;
        let parent = if pos == 0 { 0 } else { id - 1 };
        let km = if pos == 0 { 0.040 } else { 0.030 };
        buses.push(Bus {
            id,
            parent: Some(parent),
            r_ohm: R_OHM_PER_KM * km,
            x_ohm: X_OHM_PER_KM * km,
            amp_limit_a: AMPACITY_A,
        });
    }
    RadialNetwork {
        buses,
        v_min_sqr: 0.9 * 0.9,
        v_max_sqr: 1.1 * 1.1,
        transformer_kw,
        base_voltage_v: 400.0,
        base_power_kva: 100.0,
    }
}

fn hour_of(t: usize, step_hours: f64) -> f64 {
    (t % PERIODS_PER_DAY) as f64 * step_hours
}

fn bump(h: f64, centre: f64, width: f64) -> f64 {
    (-((h - centre) / width).powi(2)).exp()
}

/// Daily household shape with morning and evening peaks.
fn household_shape(h: f64, morning: f64, evening: f64) -> f64 {
    0.25 + 0.6 * bump(h, morning, 1.2) + 1.0 * bump(h, evening, 1.8) + 0.2 * bump(h, 13.0, 2.5)
}

/// Seasonal multipliers per block: (pv, load).
fn season(block: usize, blocks: usize) -> (f64, f64) {
    if blocks <= 2 {
        return (1.0, 0.9);
    }
    const PV: [f64; 4] = [0.35, 0.75, 1.0, 0.6];
    const LOAD: [f64; 4] = [1.2, 1.0, 0.85, 1.05];
    (PV[block % 4], LOAD[block % 4])
}

pub fn generate_synthetic_case(params: &SyntheticCaseParams) -> CaseBundle {
    assert!(params.prosumer_count <= params.member_count);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let dt = 0.25;
    let block_len = params.days_per_block * PERIODS_PER_DAY;
    let grid = TimeGrid::uniform(dt, params.blocks, block_len);
    let periods = grid.periods;
    let transformer_kw = 1.2 * params.member_count as f64 * params.peak_per_member_kw;
    let network = reference_network(params.member_count, transformer_kw);

    // Prosumers spread evenly: every second bus when half are prosumers.
    let prosumer_buses: Vec<usize> = (0..params.prosumer_count)
        .map(|i| 1 + i * params.member_count / params.prosumer_count.max(1))
        .collect();

    let mut members = Vec::with_capacity(params.member_count);
    for bus in 1..=params.member_count {
        let morning = rng.random_range(6.5..8.5);
        let evening = rng.random_range(18.0..20.5);
        let size = rng.random_range(0.7..1.3);
        let mut load = Vec::with_capacity(periods);
        for t in 0..periods {
            let (_, lf) = season(t / block_len, params.blocks);
            let noise = rng.random_range(0.85..1.15);
            load.push(size * lf * household_shape(hour_of(t, dt), morning, evening) * noise);
        }
        members.push(MemberProfile {
            bus,
            load_kw: load,
            pv_potential_kw: vec![0.0; periods],
            power_factor: 0.8,
        });
    }
    let mut total = vec![0.0; periods];
    for m in &members {
        for (a, l) in total.iter_mut().zip(&m.load_kw) {
            *a += l;
        }
    }
    let peak = total.iter().copied().fold(0.0, f64::max);
    let scale = params.member_count as f64 * params.peak_per_member_kw / peak;
    for m in &mut members {
        for l in &mut m.load_kw {
            *l *= scale;
        }
    }

    let days = params.blocks * params.days_per_block;
    let clearness: Vec<f64> = (0..days)
        .map(|_| if params.blocks <= 2 { rng.random_range(0.9..1.0) } else { rng.random_range(0.3..1.0) })
        .collect();
    let derate = 0.85;
    for m in &mut members {
        if !prosumer_buses.contains(&m.bus) {
            continue;
        }
        let kwp = params.pv_peak_kw * rng.random_range(0.9..1.1);
        for t in 0..periods {
            let h = hour_of(t, dt) + dt / 2.0;
            let (sf, _) = season(t / block_len, params.blocks);
            let sun = if (6.0..20.0).contains(&h) {
                (std::f64::consts::PI * (h - 6.0) / 14.0).sin().powf(1.5)
            } else {
                0.0
            };
            m.pv_potential_kw[t] = kwp * derate * sf * clearness[t / PERIODS_PER_DAY] * sun;
        }
    }

    // Energy component: bounded random walk on an hourly grid plus a daily shape.
    let fee = 0.099;
    let energy_mean = params.mean_import_price - fee;
    let mut walk = 0.0f64;
    let mut import = Vec::with_capacity(periods);
    for t in 0..periods {
        if t % 4 == 0 {
            walk = (walk + rng.random_range(-1.0..1.0) * params.price_volatility).clamp(-0.04, 0.04);
        }
        let h = hour_of(t, dt);
        let shape = 0.025 * bump(h, 8.0, 1.5) + 0.035 * bump(h, 19.0, 2.0) - 0.03 * bump(h, 13.5, 2.5);
        import.push((energy_mean + walk + shape).max(0.02));
    }
    let mean: f64 = import.iter().sum::<f64>() / periods as f64;
    for p in &mut import {
        *p *= energy_mean / mean;
    }
    let export: Vec<f64> = import.iter().map(|p| 0.55 * p).collect();

    let rides = synthetic_rides(&mut rng, params, &grid);

    CaseBundle {
        network,
        grid,
        members,
        tariffs: TariffSchedule {
            import_price: import,
            export_price: export,
            away_price: 0.45,
            unserved_price: 2.0,
            volumetric_fee: fee,
            capacity_volumetric_fee: 0.064,
            peak_fee: 59.0,
            fixed_peak_charge: 3108.0,
        },
        rides,
        ev_catalog: default_ev_catalog(),
        cs_catalog: default_cs_catalog(),
        fleet_slots: params.fleet_slots,
        cs_slots: params.cs_slots,
        finance: FinanceParams::default(),
        away_power_kw: 11.0,
    }
}

/// Day trips leaving between 07:00 and 18:00, back the same day; energy
/// uniform on [4, 15.4] kWh (mean 9.7 kWh).
fn synthetic_rides(rng: &mut ChaCha8Rng, params: &SyntheticCaseParams, grid: &TimeGrid) -> Vec<RideRequest> {
    let days = params.blocks * params.days_per_block;
    let mut rides: Vec<(usize, usize, f64)> = (0..params.ride_count)
        .map(|i| {
            // Spread rides evenly over days and randomly within a day.
            let day = (i * days) / params.ride_count.max(1);
            let dep_slot = rng.random_range(28..72);
            let len = rng.random_range(4..24usize);
            let dep = day * PERIODS_PER_DAY + dep_slot;
            let ret = (dep + len).min((day + 1) * PERIODS_PER_DAY - 1);
            let energy = rng.random_range(4.0..15.4);
            (dep, ret.min(grid.periods - 1), energy)
        })
        .collect();
    rides.sort_by_key(|r| (r.0, r.1));
    rides
        .into_iter()
        .enumerate()
        .map(|(id, (departure, ret, energy_kwh))| RideRequest {
            id,
            departure,
            ret,
            energy_kwh: (energy_kwh * 100.0).round() / 100.0,
        })
        .collect()
}

/// Bounds for [`generate_tiny_case`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TinyCaseParams {
    pub seed: u64,
    /// 2 or 3; bus 0 is the slack.
    pub buses: usize,
    /// One day split into this many periods.
    pub periods: usize,
    pub rides: usize,
    pub fleet_slots: usize,
    pub ev_models: usize,
    pub cs_models: usize,
}

impl TinyCaseParams {
    /// Random bounds drawn from `seed`, always within the brute-force limit
    /// on a slack-only station.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7f4a_7c15);
        let fleet_slots = rng.random_range(1..=2);
        Self {
            seed,
            buses: rng.random_range(2..=3),
            periods: if rng.random_bool(0.5) { 24 } else { 48 },
            rides: rng.random_range(1..=if fleet_slots == 1 { 4 } else { 3 }),
            fleet_slots,
            ev_models: rng.random_range(1..=2),
            cs_models: rng.random_range(1..=2),
        }
    }
}

/// A one-day case on a two- or three-bus feeder, small enough to enumerate.
pub fn generate_tiny_case(params: &TinyCaseParams) -> CaseBundle {
    assert!((2..=3).contains(&params.buses), "tiny cases have 2 or 3 buses");
    assert!((4..=PERIODS_PER_DAY).contains(&params.periods), "tiny cases span one day");
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let periods = params.periods;
    let dt = 24.0 / periods as f64;
    let grid = TimeGrid::uniform(dt, 1, periods);

    let mut buses = vec![Bus {
        id: 0,
        parent: None,
        r_ohm: 0.0,
        x_ohm: 0.0,
        amp_limit_a: 0.0,
    }];
    for id in 1..params.buses {
        let parent = if id == 1 || rng.random_bool(0.5) { id - 1 } else { 0 };
        let km = rng.random_range(0.03..0.08);
        buses.push(Bus {
            id,
            parent: Some(parent),
            r_ohm: R_OHM_PER_KM * km,
            x_ohm: X_OHM_PER_KM * km,
            amp_limit_a: AMPACITY_A,
        });
    }
    let network = RadialNetwork {
        buses,
        v_min_sqr: 0.9 * 0.9,
        v_max_sqr: 1.1 * 1.1,
        transformer_kw: rng.random_range(25.0..40.0),
        base_voltage_v: 400.0,
        base_power_kva: 100.0,
    };

    let pv_bus = rng.random_range(1..params.buses);
    let members = (1..params.buses)
        .map(|bus| {
            let size = rng.random_range(1.0..3.0);
            let morning = rng.random_range(6.5..8.5);
            let evening = rng.random_range(18.0..20.5);
            let load = (0..periods)
                .map(|t| {
                    let h = t as f64 * dt;
                    size * household_shape(h, morning, evening) * rng.random_range(0.9..1.1)
                })
                .collect();
            let kwp = if bus == pv_bus { rng.random_range(4.0..9.0) } else { 0.0 };
            let pv = (0..periods)
                .map(|t| {
                    let h = (t as f64 + 0.5) * dt;
                    if (6.0..20.0).contains(&h) {
                        kwp * 0.85 * (std::f64::consts::PI * (h - 6.0) / 14.0).sin().powf(1.5)
                    } else {
                        0.0
                    }
                })
                .collect();
            MemberProfile {
                bus,
                load_kw: load,
                pv_potential_kw: pv,
                power_factor: 0.8,
            }
        })
        .collect();

    let import: Vec<f64> = (0..periods)
        .map(|t| {
            let h = t as f64 * dt;
            (0.15 + 0.035 * bump(h, 19.0, 2.0) - 0.03 * bump(h, 13.5, 2.5) + rng.random_range(-0.01..0.01)).max(0.02)
        })
        .collect();
    let export = import.iter().map(|p| 0.55 * p).collect();

    let per_hour = periods as f64 / 24.0;
    let mut rides: Vec<RideRequest> = (0..params.rides)
        .map(|_| {
            let dep = (rng.random_range(7.0..17.0) * per_hour) as usize;
            let len = ((rng.random_range(1.0..5.0) * per_hour) as usize).max(1);
            RideRequest {
                id: 0,
                departure: dep,
                ret: (dep + len).min(periods - 1),
                energy_kwh: (rng.random_range(3.0..14.0f64) * 100.0).round() / 100.0,
            }
        })
        .collect();
    rides.sort_by_key(|r| (r.departure, r.ret));
    for (i, r) in rides.iter_mut().enumerate() {
        r.id = i;
    }

    let mut ev_catalog = default_ev_catalog();
    ev_catalog.truncate(params.ev_models.clamp(1, ev_catalog.len()));
    let cs_all = default_cs_catalog();
    let first = rng.random_range(0..=cs_all.len() - params.cs_models.clamp(1, cs_all.len()));
    let cs_catalog = cs_all[first..first + params.cs_models.clamp(1, cs_all.len())].to_vec();

    CaseBundle {
        network,
        grid,
        members,
        tariffs: TariffSchedule {
            import_price: import,
            export_price: export,
            away_price: 0.45,
            unserved_price: rng.random_range(1.0..3.0),
            volumetric_fee: 0.099,
            capacity_volumetric_fee: 0.064,
            peak_fee: 59.0,
            fixed_peak_charge: 3108.0,
        },
        rides,
        ev_catalog,
        cs_catalog,
        fleet_slots: params.fleet_slots,
        cs_slots: 1,
        finance: FinanceParams::default(),
        away_power_kw: 11.0,
    }
}
