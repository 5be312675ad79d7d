//! One PASS/FAIL line per acceptance criterion, written straight to stderr
//! so it shows up without `--nocapture`.

use std::io::Write as _;
use std::time::Instant;

use fleetplan_core::config::{CsLocation, ScenarioConfig, ScenarioId, SolverSettings};
use fleetplan_core::domain::{capital_recovery_factor, CaseBundle};
use fleetplan_core::oracle::{binary_count, brute_force_plan, compare_with_ac, verify_solution, MAX_BRUTE_FORCE_BINARIES};
use fleetplan_core::scenario::{ScenarioOutcome, ScenarioRunner};
use fleetplan_core::synth::{
    default_cs_catalog, default_ev_catalog, generate_synthetic_case, generate_tiny_case, SyntheticCaseParams,
    TinyCaseParams,
};
use fleetplan_engine::{ConePoint, CutRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdicts {
    lines: Vec<(usize, bool, String)>,
}

impl Verdicts {
    fn report(&mut self, n: usize, ok: bool, detail: String) {
        let line = format!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
        let _ = writeln!(std::io::stderr(), "{line}");
        self.lines.push((n, ok, line));
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn oracle_equivalence(v: &mut Verdicts) {
    let started = Instant::now();
    let settings = SolverSettings { mip_gap: 1e-8, ..SolverSettings::default() };
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    for seed in 0..20u64 {
        let params = TinyCaseParams::random(seed);
        let case = generate_tiny_case(&params);
        let mut cfg = ScenarioConfig::preset(2 + (seed % 4) as u8).unwrap();
        cfg.solver = settings.clone();
        let bins = binary_count(&case, &cfg);
        if bins > MAX_BRUTE_FORCE_BINARIES || case.network.bus_count() > 3 || case.periods() > 48 {
            problems.push(format!("seed {seed}: instance too large ({bins} binaries)"));
            continue;
        }
        let brute = match brute_force_plan(&case, &cfg) {
            Ok(b) => b,
            Err(e) => {
                problems.push(format!("seed {seed}: brute force {e}"));
                continue;
            }
        };
        let engine = ScenarioRunner::new(&settings).and_then(|mut r| r.run_coordinated(&case, &cfg));
        match engine {
            Ok(part) => {
                let d = rel(part.solution.objective, brute.objective);
                worst = worst.max(d);
                if d > 1e-5 {
                    problems.push(format!("seed {seed}: engine {} vs brute {}", part.solution.objective, brute.objective));
                }
            }
            Err(e) => problems.push(format!("seed {seed}: engine {e}")),
        }
    }
    let secs = started.elapsed().as_secs_f64();
    v.report(
        1,
        problems.is_empty() && secs < 300.0,
        format!("20 tiny instances, worst relative gap {worst:.2e}, {secs:.0} s {problems:?}"),
    );
}

struct Desk {
    case: CaseBundle,
    runs: Vec<ScenarioOutcome>,
    s3_seconds: f64,
    free: ScenarioOutcome,
}

fn desk_runs() -> Desk {
    let case = generate_synthetic_case(&SyntheticCaseParams::desk());
    let mut runner = ScenarioRunner::new(&SolverSettings::default()).unwrap();
    runner.engine_mut().options.record_cuts = true;
    let mut runs = Vec::new();
    let mut s3_seconds = f64::NAN;
    for s in 1..=5u8 {
        let t = Instant::now();
        runs.push(runner.run_scenario(&case, &ScenarioConfig::preset(s).unwrap()).unwrap());
        if s == 3 {
            s3_seconds = t.elapsed().as_secs_f64();
        }
    }
    let mut cfg = ScenarioConfig::preset(3).unwrap();
    cfg.scenario = ScenarioId::Custom;
    cfg.cs_location = CsLocation::Free;
    let free = runner.run_scenario(&case, &cfg).unwrap();
    Desk { case, runs, s3_seconds, free }
}

fn tightness(v: &mut Verdicts, d: &Desk) {
    let s3 = &d.runs[2].parts[0];
    let cone = s3.solution.max_cone_violation;
    let ac = compare_with_ac(&d.case, s3).unwrap();
    v.report(
        2,
        cone <= 1e-6 && ac.max_voltage_dev_pu <= 1e-5 && d.s3_seconds < 600.0 && ac.periods == 192,
        format!(
            "desk S3: cone residual {cone:.2e}, AC voltage gap {:.2e} p.u. over {} periods, {:.0} s",
            ac.max_voltage_dev_pu, ac.periods, d.s3_seconds
        ),
    );
}

fn dominance(v: &mut Verdicts, d: &Desk) {
    let c: Vec<f64> = d.runs.iter().map(|o| o.kpis.total_cost).collect();
    let ok = c[2] <= c[1] && c[1] <= c[0] && c[2] < c[0];
    v.report(
        3,
        ok,
        format!(
            "S1 {:.2}, S2 {:.2} ({:+.2} %), S3 {:.2} ({:+.2} %)",
            c[0],
            c[1],
            100.0 * (c[1] - c[0]) / c[0],
            c[2],
            100.0 * (c[2] - c[0]) / c[0]
        ),
    );
}

fn peak_behaviour(v: &mut Verdicts, d: &Desk) {
    let (s3, s4, s5) = (&d.runs[2].kpis, &d.runs[3].kpis, &d.runs[4].kpis);
    let red = |k: f64| 100.0 * (s3.max_import_kw - k) / s3.max_import_kw;
    let export_same = rel(s5.max_export_kw, s3.max_export_kw) <= 1e-6 && rel(s4.max_export_kw, s3.max_export_kw) <= 1e-6;
    let ok = s5.max_import_kw < s3.max_import_kw && red(s5.max_import_kw) >= red(s4.max_import_kw) && export_same;
    v.report(
        4,
        ok,
        format!(
            "max import S3 {:.2} kW, S4 {:.2} kW ({:.1} %), S5 {:.2} kW ({:.1} %); max export S3 {:.3}, S4 {:.3}, S5 {:.3} kW",
            s3.max_import_kw,
            s4.max_import_kw,
            red(s4.max_import_kw),
            s5.max_import_kw,
            red(s5.max_import_kw),
            s3.max_export_kw,
            s4.max_export_kw,
            s5.max_export_kw
        ),
    );
}

fn free_location(v: &mut Verdicts, d: &Desk) {
    let slack = d.runs[2].objective();
    let free = d.free.objective();
    let gap = SolverSettings::default().mip_gap;
    let chosen = d.free.kpis.investment.stations.first().map(|s| s.bus);
    let tried = &d.free.placements;
    let chosen_losses = d.free.kpis.losses_kwh;
    let min_losses = tried.iter().map(|p| p.losses_kwh).fold(f64::INFINITY, f64::min);
    let ok = free <= slack * (1.0 + gap) && !tried.is_empty() && chosen_losses <= min_losses * (1.0 + 1e-9);
    v.report(
        5,
        ok,
        format!(
            "free {free:.2} vs slack-only {slack:.2}; station at {chosen:?} with losses {chosen_losses:.2} kWh/y, least among {} placements {min_losses:.2}",
            tried.len()
        ),
    );
}

fn audits(v: &mut Verdicts, d: &Desk) {
    let mut worst = 0.0f64;
    let mut replay = 0.0f64;
    let mut identity = true;
    let mut failures = Vec::new();
    for out in d.runs.iter().chain([&d.free]) {
        for part in &out.parts {
            let rep = verify_solution(&d.case, part, 1e-6);
            for (tag, f) in rep.failures() {
                failures.push(format!("{} {:?} {tag} {:.2e}", out.config.label(), part.role, f.max_residual));
            }
            worst = worst.max(rep.families.values().filter(|f| f.counted).map(|f| f.max_residual).fold(0.0, f64::max));
            replay = replay.max(rep.soc_replay_max_kwh);
            identity &= rep.unserved_identity_exact;
        }
    }
    v.report(
        6,
        failures.is_empty() && replay <= 1e-9 && identity,
        format!("worst residual {worst:.2e}, SoC replay {replay:.2e} kWh, unserved identity exact: {identity} {failures:?}"),
    );
}

fn cone_sample(rng: &mut ChaCha8Rng) -> ConePoint {
    let p: f64 = rng.random_range(-2.0..2.0);
    let q: f64 = rng.random_range(-2.0..2.0);
    let v: f64 = rng.random_range(0.8..1.2);
    let surface = (p * p + q * q) / v;
    let i = if rng.random_bool(0.5) { surface } else { surface * (1.0 + rng.random_range(0.0..3.0)) };
    ConePoint::new(p, q, i, v)
}

fn cuts(v: &mut Verdicts, d: &Desk) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let records: Vec<&CutRecord> = d.runs.iter().flat_map(|o| &o.parts).flat_map(|p| &p.solution.cut_log).collect();
    let mut invalid = 0usize;
    let mut not_separating = 0usize;
    for rec in &records {
        if !(rec.cut.evaluate(&rec.separated) > 0.0) {
            not_separating += 1;
        }
        for _ in 0..1000 {
            let s = cone_sample(&mut rng);
            if rec.cut.evaluate(&s) > 1e-9 * (1.0 + s.current + s.voltage) {
                invalid += 1;
                break;
            }
        }
    }
    let gap = SolverSettings::default().mip_gap;
    let mut drops = 0usize;
    for part in d.runs.iter().flat_map(|o| &o.parts) {
        let w = &part.solution.warmup_history;
        drops += w.windows(2).filter(|p| p[1] < p[0] - 1e-9 * p[0].abs().max(1.0)).count();
        let h = &part.solution.objective_history;
        drops += h.windows(2).filter(|p| p[1] < p[0] - gap * p[0].abs().max(1.0)).count();
    }
    v.report(
        7,
        !records.is_empty() && invalid == 0 && not_separating == 0 && drops == 0,
        format!(
            "{} cuts x 1000 samples: {invalid} invalid, {not_separating} not separating; {drops} objective decreases",
            records.len()
        ),
    );
}

fn spot_values(v: &mut Verdicts) {
    let crf = capital_recovery_factor(0.0, 7).unwrap();
    let ev = default_ev_catalog();
    let cs = default_cs_catalog();
    let leaf = ev.iter().find(|m| m.name == "Nissan Leaf").unwrap().price_eur;
    let medium = cs.iter().find(|m| m.name == "Medium AC").unwrap().price_eur;
    let annuity = crf * (2.0 * leaf + medium);
    v.report(
        8,
        crf == 1.0 / 7.0 && (annuity - 3052.57).abs() < 0.005,
        format!("CRF(0, 7) = {crf}, annuity of 2 x Leaf + 1 x Medium AC = {annuity:.2} €/y"),
    );
}

#[test]
fn acceptance() {
    let _ = env_logger::builder().is_test(true).try_init();
    let mut v = Verdicts { lines: Vec::new() };
    spot_values(&mut v);
    oracle_equivalence(&mut v);
    let desk = desk_runs();
    tightness(&mut v, &desk);
    dominance(&mut v, &desk);
    peak_behaviour(&mut v, &desk);
    free_location(&mut v, &desk);
    audits(&mut v, &desk);
    cuts(&mut v, &desk);
    v.lines.sort_by_key(|l| l.0);
    let failed: Vec<&String> = v.lines.iter().filter(|l| !l.1).map(|l| &l.2).collect();
    assert!(failed.is_empty(), "{failed:#?}");
}
