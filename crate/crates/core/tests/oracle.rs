use fleetplan_core::config::{ScenarioConfig, SolverSettings};
use fleetplan_core::domain::CaseBundle;
use fleetplan_core::oracle::{ac_power_flow, binary_count, brute_force_plan, compare_with_ac, verify_solution, MAX_BRUTE_FORCE_BINARIES};
use fleetplan_core::scenario::{ScenarioRunner, SolvedPart};
use fleetplan_core::synth::{generate_tiny_case, TinyCaseParams};

fn solve(case: &CaseBundle, preset: u8) -> SolvedPart {
    let mut cfg = ScenarioConfig::preset(preset).unwrap();
    cfg.solver = SolverSettings { mip_gap: 1e-8, ..SolverSettings::default() };
    ScenarioRunner::new(&cfg.solver).unwrap().run_coordinated(case, &cfg).unwrap()
}

#[test]
fn engine_matches_enumeration() {
    for (seed, preset) in [(100u64, 2u8), (101, 3), (102, 5)] {
        let case = generate_tiny_case(&TinyCaseParams::random(seed));
        let cfg = ScenarioConfig::preset(preset).unwrap();
        assert!(binary_count(&case, &cfg) <= MAX_BRUTE_FORCE_BINARIES);
        let brute = brute_force_plan(&case, &cfg).unwrap();
        assert!(brute.feasible > 0 && brute.feasible <= brute.combinations);
        let part = solve(&case, preset);
        let rel = (part.solution.objective - brute.objective).abs() / brute.objective.abs().max(1.0);
        assert!(rel <= 1e-5, "seed {seed}: engine {} vs brute {}", part.solution.objective, brute.objective);
    }
}

#[test]
fn brute_force_refuses_large_cases() {
    let case = generate_tiny_case(&TinyCaseParams {
        seed: 1,
        buses: 3,
        periods: 48,
        rides: 12,
        fleet_slots: 2,
        ev_models: 2,
        cs_models: 3,
    });
    assert!(brute_force_plan(&case, &ScenarioConfig::preset(3).unwrap()).is_err());
}

#[test]
fn audit_flags_tampered_values() {
    let case = generate_tiny_case(&TinyCaseParams::random(103));
    let part = solve(&case, 3);
    assert!(verify_solution(&case, &part, 1e-6).passed());
    let reg = &part.model.registry;

    let mut soc = part.clone();
    let col = reg.soc.as_ref().unwrap().at(&[0, case.periods() / 2]);
    soc.solution.values[col] += 1.0;
    let rep = verify_solution(&case, &soc, 1e-6);
    assert!(!rep.passed());
    assert!(rep.residual("16") >= 1.0 - 1e-9, "{:?}", rep.failures());

    let mut frac = part.clone();
    frac.solution.values[reg.ev_invest.as_ref().unwrap().at(&[0, 0])] = 0.5;
    let rep = verify_solution(&case, &frac, 1e-6);
    assert!(rep.residual("integrality") >= 0.5 - 1e-12);
    assert!(!rep.passed());
}

#[test]
fn ac_sweep_agrees_with_the_relaxation() {
    let case = generate_tiny_case(&TinyCaseParams::random(104));
    let part = solve(&case, 3);
    let ac = compare_with_ac(&case, &part).unwrap();
    assert_eq!(ac.periods, case.periods());
    assert!(ac.max_voltage_dev_pu <= 1e-5, "{ac:?}");
}

#[test]
fn ac_sweep_without_load_is_flat() {
    let case = generate_tiny_case(&TinyCaseParams::random(105));
    let n = case.network.bus_count();
    let st = ac_power_flow(&case.network, &vec![0.0; n], &vec![0.0; n]).unwrap();
    for b in 0..n {
        assert!((st.v_mag(b) - 1.0).abs() < 1e-12);
    }
    assert!(st.losses_kw.abs() < 1e-12);
}
