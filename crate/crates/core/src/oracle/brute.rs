//! Exhaustive search over investment and assignment choices for tiny cases,
//! each continuous remainder solved with native cones.

use fleetplan_engine::{ClarabelBackend, Engine, SolveOptions};

use crate::config::ScenarioConfig;
use crate::domain::{CaseBundle, RideCalendar};
use crate::error::{CoreError, Result};
use crate::formulation::{build_model, ModelInstance, ModelSpec};

pub const MAX_BRUTE_FORCE_BINARIES: usize = 24;

#[derive(Clone, Debug)]
pub struct BruteForceResult {
    pub objective: f64,
    pub values: Vec<f64>,
    pub model: ModelInstance,
    /// Binary assignments enumerated after symmetry and overlap pruning.
    pub combinations: usize,
    pub feasible: usize,
}

/// One candidate: model per EV slot (0 = none, k + 1 = model k), station
/// choice (0 = none, else 1 + index into `stations`), slot per ride.
#[derive(Clone, Debug)]
struct Choice {
    fleet: Vec<usize>,
    station: usize,
    rides: Vec<Option<usize>>,
}

/// Investment and assignment binaries a case would need.
pub fn binary_count(case: &CaseBundle, cfg: &ScenarioConfig) -> usize {
    let allowed = (0..case.network.bus_count()).filter(|&b| cfg.cs_location.allows(b)).count();
    case.fleet_slots * case.ev_catalog.len()
        + case.cs_slots * allowed * case.cs_catalog.len()
        + case.rides.len() * case.fleet_slots
}

pub fn brute_force_plan(case: &CaseBundle, cfg: &ScenarioConfig) -> Result<BruteForceResult> {
    let count = binary_count(case, cfg);
    if count > MAX_BRUTE_FORCE_BINARIES {
        return Err(CoreError::Oracle(format!(
            "{count} investment/assignment binaries, brute force handles at most {MAX_BRUTE_FORCE_BINARIES}"
        )));
    }
    if case.cs_slots != 1 {
        return Err(CoreError::Oracle("brute force needs exactly one station slot".into()));
    }
    let model = build_model(case, &ModelSpec::coordinated(cfg)?)?;
    let stations: Vec<(usize, usize)> = model
        .registry
        .cs_locations
        .iter()
        .flat_map(|&b| (0..case.cs_catalog.len()).map(move |c| (b, c)))
        .collect();
    let choices = enumerate(case, stations.len());
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(choices.len().max(1));
    let chunk = choices.len().div_ceil(threads.max(1)).max(1);

    let results: Vec<Result<Vec<(usize, f64, Vec<f64>)>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = choices
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                let model = &model;
                let stations = &stations;
                scope.spawn(move || {
                    let mut engine = Engine::new(Box::new(ClarabelBackend)).with_options(SolveOptions::default());
                    let mut out = Vec::new();
                    for (i, choice) in part.iter().enumerate() {
                        let x = fixed_binaries(case, model, stations, choice);
                        let fixed = model.program.with_integers_fixed(&x);
                        let sol = engine.solve_relaxation(&fixed)?;
                        if sol.is_feasible() {
                            out.push((c * chunk + i, sol.objective, sol.values));
                        }
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("enumeration thread panicked")).collect()
    });

    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    let mut feasible = 0;
    for r in results {
        for cand in r? {
            feasible += 1;
            let better = match &best {
                None => true,
                Some((idx, obj, _)) => cand.1 < *obj || (cand.1 == *obj && cand.0 < *idx),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    let (_, objective, values) =
        best.ok_or_else(|| CoreError::Infeasible("no enumerated assignment is feasible".into()))?;
    Ok(BruteForceResult { objective, values, model, combinations: choices.len(), feasible })
}

/// All fleet, station and ride choices. Fleet choices are non-increasing
/// across slots (slots are interchangeable); a ride only goes to a slot
/// holding a car and never shares it with an overlapping ride.
fn enumerate(case: &CaseBundle, station_options: usize) -> Vec<Choice> {
    let slots = case.fleet_slots;
    let models = case.ev_catalog.len();
    let mut fleets = Vec::new();
    let mut cur = vec![0usize; slots];
    fn rec(pos: usize, cap: usize, models: usize, cur: &mut Vec<usize>, fleets: &mut Vec<Vec<usize>>) {
        if pos == cur.len() {
            fleets.push(cur.clone());
            return;
        }
        for m in 0..=cap.min(models) {
            cur[pos] = m;
            rec(pos + 1, m, models, cur, fleets);
        }
    }
    rec(0, models, models, &mut cur, &mut fleets);

    let mut out = Vec::new();
    for fleet in &fleets {
        let owned: Vec<usize> = (0..slots).filter(|&n| fleet[n] > 0).collect();
        let mut assignments = Vec::new();
        let mut cur = vec![None; case.rides.len()];
        assign(case, 0, &owned, &mut cur, &mut assignments);
        for station in 0..=station_options {
            for rides in &assignments {
                out.push(Choice { fleet: fleet.clone(), station, rides: rides.clone() });
            }
        }
    }
    out
}

fn assign(
    case: &CaseBundle,
    r: usize,
    owned: &[usize],
    cur: &mut Vec<Option<usize>>,
    out: &mut Vec<Vec<Option<usize>>>,
) {
    if r == case.rides.len() {
        out.push(cur.clone());
        return;
    }
    cur[r] = None;
    assign(case, r + 1, owned, cur, out);
    for &n in owned {
        let clash = (0..r).any(|q| cur[q] == Some(n) && case.rides[q].overlaps(&case.rides[r]));
        if !clash {
            cur[r] = Some(n);
            assign(case, r + 1, owned, cur, out);
        }
    }
    cur[r] = None;
}

/// Column values for the binaries of `choice`, states included: a car is
/// in use while one of its rides is active, otherwise plugged whenever a
/// station exists (plugging only widens the feasible charging).
fn fixed_binaries(case: &CaseBundle, model: &ModelInstance, stations: &[(usize, usize)], choice: &Choice) -> Vec<f64> {
    let reg = &model.registry;
    let mut x = vec![0.0; model.program.num_columns()];
    let ev = reg.ev();
    for (n, &m) in choice.fleet.iter().enumerate() {
        if m > 0 {
            x[ev.at(&[n, m - 1])] = 1.0;
        }
    }
    let has_station = choice.station > 0;
    if has_station {
        let (b, c) = stations[choice.station - 1];
        x[reg.cs_invest.as_ref().expect("provider").at(&[0, b, c])] = 1.0;
    }
    let use_ = reg.ride_use.as_ref().expect("provider");
    for (r, slot) in choice.rides.iter().enumerate() {
        if let Some(n) = slot {
            x[use_.at(&[*n, r])] = 1.0;
        }
    }
    let state = reg.state.as_ref().expect("provider");
    let cal = RideCalendar::new(&case.rides, case.periods());
    let in_use = case.cs_slots;
    for (n, &m) in choice.fleet.iter().enumerate() {
        if m == 0 {
            continue;
        }
        for t in 0..case.periods() {
            let busy = cal.active[t].iter().any(|&r| choice.rides[r] == Some(n));
            if busy {
                x[state.at(&[n, in_use, t])] = 1.0;
            } else if has_station {
                x[state.at(&[n, 0, t])] = 1.0;
            }
        }
    }
    x
}
