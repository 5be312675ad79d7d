use fleetplan_core::config::{CsLocation, PeakTariff, ScenarioConfig};
use fleetplan_core::domain::{overlapping_pairs, CaseBundle};
use fleetplan_core::formulation::{build_model, tags, ModelInstance, ModelSpec};
use fleetplan_core::synth::{generate_synthetic_case, generate_tiny_case, SyntheticCaseParams, TinyCaseParams};
use fleetplan_engine::{ClarabelBackend, Engine};

fn desk() -> CaseBundle {
    generate_synthetic_case(&SyntheticCaseParams::desk())
}

fn coordinated(case: &CaseBundle, preset: u8) -> ModelInstance {
    build_model(case, &ModelSpec::coordinated(&ScenarioConfig::preset(preset).unwrap()).unwrap()).unwrap()
}

fn expected_counts(case: &CaseBundle, m: &ModelInstance) -> Vec<(&'static str, usize)> {
    let n = case.fleet_slots;
    let s = case.cs_slots;
    let t = case.periods();
    let r = case.rides.len();
    let b = case.network.bus_count();
    let lines = b - 1;
    let locs = m.registry.cs_locations.len();
    let v2g = m.spec.v2g;
    let pairs = overlapping_pairs(&case.rides).len();
    let peak = match m.spec.peak {
        PeakTariff::NoneFixed => 0,
        PeakTariff::Individual => b * t,
        PeakTariff::Collective => t,
    };
    vec![
        ("5", n),
        ("6", s),
        ("7", r),
        ("8", n * r),
        ("9", n * pairs),
        ("10", n * t),
        ("11", n * s * t),
        ("12", n * t),
        ("13", n * s * t * if v2g { 4 } else { 2 }),
        ("14", s * t),
        ("15", s * locs * t * if v2g { 2 } else { 1 }),
        ("16", n * t),
        ("17", 2 * n * t),
        ("18", n * r),
        ("19", n * r),
        ("20", b * t),
        ("21", t),
        ("22", b * t),
        ("23", b * t),
        ("24", lines * t),
        ("28", t),
        ("peak", peak),
        ("v2g-cap", if m.spec.has_v2g_cap() { n * s * t + t } else { 0 }),
    ]
}

#[test]
fn row_counts_match_index_sets() {
    let case = desk();
    for preset in 2..=5 {
        let m = coordinated(&case, preset);
        for (tag, want) in expected_counts(&case, &m) {
            assert_eq!(m.rows_with_tag(tag), want, "scenario {preset}, tag {tag}");
        }
        assert_eq!(m.program.cones.len(), (case.network.bus_count() - 1) * case.periods());
        let total: usize = expected_counts(&case, &m).iter().map(|(_, c)| c).sum();
        assert_eq!(m.program.rows.len(), total, "scenario {preset}: untagged or extra rows");
    }
}

#[test]
fn every_tag_is_known() {
    let case = desk();
    for preset in 2..=5 {
        let m = coordinated(&case, preset);
        for row in &m.program.rows {
            let tag = row.tag.as_str();
            assert!(tags::ALL.contains(&tag) || tags::EXTRA.contains(&tag), "unknown tag {tag}");
        }
        for cone in &m.program.cones {
            assert_eq!(cone.tag.as_str(), "25");
        }
    }
}

#[test]
fn standalone_parts_have_their_own_variables() {
    let case = desk();
    let ec = build_model(&case, &ModelSpec::community_only()).unwrap();
    assert!(ec.registry.ev_invest.is_none() && ec.registry.p_cs.is_none());
    assert!(ec.registry.v_sqr.is_some());
    assert_eq!(ec.rows_with_tag("7"), 0);
    let msp = build_model(&case, &ModelSpec::provider_only(vec![10.0; case.periods()])).unwrap();
    assert!(msp.registry.v_sqr.is_none());
    assert!(msp.program.cones.is_empty());
    assert_eq!(msp.registry.cs_locations, vec![0]);
    assert_eq!(msp.rows_with_tag("28"), case.periods());
    assert!(build_model(&case, &ModelSpec::provider_only(vec![0.0; 3])).is_err());
}

#[test]
fn none_fixed_has_no_epigraph() {
    let case = desk();
    let m = coordinated(&case, 3);
    assert!(m.registry.peak_bus.is_none() && m.registry.peak_coll.is_none());
    assert!(coordinated(&case, 4).registry.peak_bus.is_some());
    assert!(coordinated(&case, 5).registry.peak_coll.is_some());
}

#[test]
fn free_location_opens_every_bus() {
    let case = desk();
    let mut cfg = ScenarioConfig::preset(3).unwrap();
    cfg.cs_location = CsLocation::Free;
    let m = build_model(&case, &ModelSpec::coordinated(&cfg).unwrap()).unwrap();
    assert_eq!(m.registry.cs_locations.len(), case.network.bus_count());
    cfg.cs_location = CsLocation::Bus(7);
    let m = build_model(&case, &ModelSpec::coordinated(&cfg).unwrap()).unwrap();
    assert_eq!(m.registry.cs_locations, vec![7]);
    let cs = m.registry.cs_invest.as_ref().unwrap();
    for b in 0..case.network.bus_count() {
        let open = m.program.columns[cs.at(&[0, b, 0])].upper;
        assert_eq!(open, if b == 7 { 1.0 } else { 0.0 });
    }
}

/// Interval of `x` implied by the single-variable remainder of rows that
/// also mention fixed binaries.
fn implied_interval(m: &ModelInstance, x: usize, fixed: &[(usize, f64)], tag: &str) -> (f64, f64) {
    let col = &m.program.columns[x];
    let (mut lo, mut hi) = (col.lower, col.upper);
    for row in m.program.rows.iter().filter(|r| r.tag.as_str() == tag) {
        let Some(&(_, a)) = row.terms.iter().find(|(j, _)| *j == x) else { continue };
        let mut rest = 0.0;
        for &(j, c) in &row.terms {
            if j != x {
                rest += c * fixed.iter().find(|(f, _)| *f == j).map_or(0.0, |(_, v)| *v);
            }
        }
        let (l, u) = ((row.lower - rest) / a, (row.upper - rest) / a);
        let (l, u) = if a > 0.0 { (l, u) } else { (u, l) };
        lo = lo.max(l);
        hi = hi.min(u);
    }
    (lo, hi)
}

#[test]
fn charging_power_linearization_is_exact() {
    let case = desk();
    for preset in [2u8, 3] {
        let m = coordinated(&case, preset);
        let reg = &m.registry;
        let (ev, state, p_ev) = (reg.ev(), reg.state.as_ref().unwrap(), reg.p_ev.as_ref().unwrap());
        let (n, s, t) = (1, 0, 57);
        for (k, model) in case.ev_catalog.iter().enumerate() {
            for owned in [0.0, 1.0] {
                for plugged in [0.0, 1.0] {
                    let mut fixed = vec![(state.at(&[n, s, t]), plugged)];
                    for j in 0..case.ev_catalog.len() {
                        fixed.push((ev.at(&[n, j]), if j == k { owned } else { 0.0 }));
                    }
                    let (lo, hi) = implied_interval(&m, p_ev.at(&[n, s, t]), &fixed, "13");
                    let on = owned * plugged * model.power_kw;
                    let want_lo = if preset == 3 { -on } else { 0.0 };
                    assert!((hi - on).abs() < 1e-12, "upper {hi} vs {on}");
                    assert!((lo - want_lo).abs() < 1e-12, "lower {lo} vs {want_lo}");
                }
            }
        }
    }
}

fn tiny() -> CaseBundle {
    generate_tiny_case(&TinyCaseParams {
        seed: 11,
        buses: 3,
        periods: 24,
        rides: 2,
        fleet_slots: 1,
        ev_models: 2,
        cs_models: 2,
    })
}

fn solve_fixed(m: &ModelInstance, x: &[f64]) -> Vec<f64> {
    let fixed = m.program.with_integers_fixed(x);
    let sol = Engine::new(Box::new(ClarabelBackend)).solve_relaxation(&fixed).unwrap();
    assert!(sol.is_feasible(), "{:?}", sol.status);
    sol.values
}

#[test]
fn collective_peak_sits_on_the_flat_import() {
    let mut case = tiny();
    // Flat 10 kW household demand and no PV: imports are pinned to it.
    let t = case.periods();
    for m in &mut case.members {
        m.load_kw = vec![0.0; t];
        m.pv_potential_kw = vec![0.0; t];
    }
    case.members[0].load_kw = vec![10.0; t];
    case.network.buses.iter_mut().skip(1).for_each(|b| {
        b.r_ohm = 0.0;
        b.x_ohm = 0.0;
    });
    case.members[0].power_factor = 1.0;
    let m = coordinated(&case, 5);
    let x = solve_fixed(&m, &vec![0.0; m.program.num_columns()]);
    let peak = x[m.registry.peak_coll.as_ref().unwrap().at(&[0])];
    assert!((peak - 10.0).abs() < 1e-5, "peak {peak}");
    assert!((59.0 * peak - 590.0).abs() < 1e-3);
}

#[test]
fn individual_peak_on_a_consumer_bus_is_its_load_peak() {
    let case = tiny();
    let m = coordinated(&case, 4);
    let x = solve_fixed(&m, &vec![0.0; m.program.num_columns()]);
    let peaks = m.registry.peak_bus.as_ref().unwrap();
    for member in &case.members {
        if member.is_prosumer() {
            continue;
        }
        let want = member.load_kw.iter().copied().fold(0.0, f64::max);
        let got = x[peaks.at(&[member.bus])];
        assert!((got - want).abs() < 1e-5 * want.max(1.0), "bus {}: {got} vs {want}", member.bus);
    }
}
