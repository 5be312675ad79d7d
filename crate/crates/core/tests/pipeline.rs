use fleetplan_core::config::{PeakTariff, ScenarioConfig, SolverSettings};
use fleetplan_core::domain::CaseBundle;
use fleetplan_core::kpi::collect_flows;
use fleetplan_core::oracle::{recompute_objective, verify_solution};
use fleetplan_core::report::{compare_scenarios, emit_report, parse_csv_report, ReportFormat};
use fleetplan_core::results::{load_outcome_parts, read_scenario_document, write_outcome};
use fleetplan_core::scenario::{PartRole, ScenarioOutcome, ScenarioRunner};
use fleetplan_core::synth::{generate_tiny_case, TinyCaseParams};

fn tiny(seed: u64) -> CaseBundle {
    generate_tiny_case(&TinyCaseParams {
        seed,
        buses: 3,
        periods: 48,
        rides: 3,
        fleet_slots: 2,
        ev_models: 2,
        cs_models: 2,
    })
}

fn settings() -> SolverSettings {
    SolverSettings { mip_gap: 1e-7, ..SolverSettings::default() }
}

fn run_all(case: &CaseBundle) -> Vec<ScenarioOutcome> {
    let mut runner = ScenarioRunner::new(&settings()).unwrap();
    (1..=5)
        .map(|s| {
            let mut cfg = ScenarioConfig::preset(s).unwrap();
            cfg.solver = settings();
            runner.run_scenario(case, &cfg).unwrap()
        })
        .collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn scenarios_on_tiny_cases() {
    for seed in [2u64, 9] {
        let case = tiny(seed);
        let outs = run_all(&case);

        for out in &outs {
            let label = out.config.label();
            // Objective equals the KPI decomposition rebuilt from raw values.
            assert!(close(out.kpis.total_cost, out.objective(), 1e-7), "{label}: {} vs {}", out.kpis.total_cost, out.objective());
            let k = &out.kpis;
            let parts = k.annuity + k.fleet_fixed_cost + k.away_cost + k.unserved_cost + k.supply_cost - k.supply_revenue;
            let peak = if k.peak_tariff == PeakTariff::NoneFixed { 0.0 } else { k.peak_cost };
            assert!(close(parts + peak, k.total_cost, 1e-12), "{label}");

            for part in &out.parts {
                let audit = verify_solution(&case, part, 1e-6);
                assert!(audit.passed(), "{label} {:?}: {:?}", part.role, audit.failures());
                assert!(audit.soc_replay_max_kwh <= 1e-9, "{label}");
                assert!(close(recompute_objective(&case, part), part.solution.objective, 1e-9));
            }

            // Energy balance over all parts, period by period.
            let f = collect_flows(&case, &out.parts);
            let load = case.total_load();
            for t in 0..case.periods() {
                let supply = f.imports_kw[t] - f.exports_kw[t] + f.pv_kw[t];
                let demand = load[t] + f.charging_kw[t] + f.losses_kw[t];
                assert!((supply - demand).abs() <= 1e-5 * (1.0 + load[t]), "{label} t {t}: {supply} vs {demand}");
            }
        }

        // S1 is the sum of its two parts.
        let s1 = &outs[0];
        let ec = s1.part(PartRole::Community).unwrap().solution.objective;
        let msp = s1.part(PartRole::Provider).unwrap().solution.objective;
        assert!(close(s1.objective(), ec + msp, 1e-12));
        assert!(close(s1.kpis.total_cost, ec + msp, 1e-7));

        // Coordination and V2G never cost more.
        let cost: Vec<f64> = outs.iter().map(|o| o.objective()).collect();
        assert!(cost[1] <= cost[0] * (1.0 + 1e-6) + 1e-6, "seed {seed}: {cost:?}");
        assert!(cost[2] <= cost[1] * (1.0 + 1e-6) + 1e-6, "seed {seed}: {cost:?}");

        // Peak epigraphs sit on the realised maxima.
        for out in &outs[3..] {
            let part = &out.parts[0];
            let reg = &part.model.registry;
            let x = &part.solution.values;
            let f = collect_flows(&case, &out.parts);
            match out.config.peak_tariff {
                PeakTariff::Collective => {
                    let peak = x[reg.peak_coll.as_ref().unwrap().at(&[0])];
                    let max = f.imports_kw.iter().copied().fold(0.0, f64::max);
                    assert!((peak - max).abs() <= 1e-6 * (1.0 + max), "collective {peak} vs {max}");
                }
                PeakTariff::Individual => {
                    let peaks = reg.peak_bus.as_ref().unwrap();
                    for b in 0..case.network.bus_count() {
                        let want = f.bus_import_peak_kw[b];
                        let got = x[peaks.at(&[b])];
                        assert!((got - want).abs() <= 1e-6 * (1.0 + want), "bus {b}: {got} vs {want}");
                    }
                }
                PeakTariff::NoneFixed => unreachable!(),
            }
        }
    }
}

#[test]
fn stored_results_reload_and_compare() {
    let case = tiny(4);
    let mut runner = ScenarioRunner::new(&settings()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut records = Vec::new();
    for s in [1u8, 3] {
        let out = runner.run_scenario(&case, &ScenarioConfig::preset(s).unwrap()).unwrap();
        let paths = write_outcome(dir.path(), &case, &out).unwrap();
        let doc = read_scenario_document(&paths[0]).unwrap();
        assert_eq!(doc.kpis, out.kpis);
        assert_eq!(doc.parts.len(), out.parts.len());
        let (_, parts) = load_outcome_parts(&case, &paths[0]).unwrap();
        for (a, b) in parts.iter().zip(&out.parts) {
            assert_eq!(a.role, b.role);
            assert_eq!(a.solution.values, b.solution.values);
            assert!(verify_solution(&case, a, 1e-6).passed());
        }
        records.push(out.kpis);
    }

    // Stored parts are tied to their case.
    let other = tiny(5);
    assert!(load_outcome_parts(&other, &dir.path().join("s1.json")).is_err());

    let csv = emit_report(&records, ReportFormat::Csv);
    let back = parse_csv_report(&csv).unwrap();
    assert_eq!(back.len(), 2);
    for (a, b) in back.iter().zip(&records) {
        assert_eq!(a.numbers(), b.numbers());
        assert_eq!(a.scenario, b.scenario);
        assert_eq!(a.case_hash, b.case_hash);
    }

    let md = emit_report(&records, ReportFormat::Markdown);
    for section in ["Economic", "Energy", "Grid"] {
        assert!(md.contains(section), "{md}");
    }

    let cmp = compare_scenarios(&records).unwrap();
    assert_eq!(cmp.baseline, 0);
    let row = cmp.row("total_cost").unwrap();
    let want = 100.0 * (records[1].total_cost - records[0].total_cost) / records[0].total_cost;
    assert!((row.deltas_pct[1].unwrap() - want).abs() < 1e-9);

    let same = compare_scenarios(&[records[1].clone(), records[1].clone()]).unwrap();
    assert!(same.rows.iter().all(|r| r.deltas_pct[1] == Some(0.0)));
    let mut foreign = records[1].clone();
    foreign.case_hash = "0".repeat(16);
    assert!(compare_scenarios(&[records[0].clone(), foreign]).is_err());
    assert!(compare_scenarios(&records[..1]).is_err());
}
