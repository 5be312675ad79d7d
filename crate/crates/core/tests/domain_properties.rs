use std::collections::BTreeSet;

use fleetplan_core::domain::{
    away_energy_cap, capital_recovery_factor, overlapping_pairs, rides_returning_at, validate_case, RideRequest,
    TimeGrid,
};
use fleetplan_core::synth::{generate_synthetic_case, SyntheticCaseParams};
use proptest::prelude::*;

fn rides_strategy(max: usize, horizon: usize) -> impl Strategy<Value = Vec<RideRequest>> {
    prop::collection::vec((0..horizon, 0..40usize, 0.0..30.0f64), 0..=max).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(id, (dep, len, e))| RideRequest {
                id,
                departure: dep,
                ret: dep + len,
                energy_kwh: e,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn overlap_pairs_match_double_loop(rides in rides_strategy(200, 600)) {
        let fast = overlapping_pairs(&rides);
        let mut slow = BTreeSet::new();
        for i in 0..rides.len() {
            for j in 0..rides.len() {
                if i != j && rides[i].departure <= rides[j].ret && rides[j].departure <= rides[i].ret {
                    slow.insert((i.min(j), i.max(j)));
                }
            }
        }
        prop_assert_eq!(&fast, &slow);
        for &(i, j) in &fast {
            prop_assert!(rides[i].overlaps(&rides[j]) && rides[j].overlaps(&rides[i]));
        }
    }

    #[test]
    fn returning_sets_partition_rides(rides in rides_strategy(120, 300)) {
        let horizon = rides.iter().map(|r| r.ret + 1).max().unwrap_or(0);
        let mut seen = vec![0usize; rides.len()];
        for t in 0..horizon {
            for r in rides_returning_at(&rides, t) {
                seen[r] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn annualization_covers_one_year(step in 0.05..2.0f64, blocks in 1..8usize, len in 1..800usize) {
        let g = TimeGrid::uniform(step, blocks, len);
        prop_assert!((g.annualization_factor() * g.periods as f64 * g.step_hours - 8760.0).abs() <= 1e-9);
    }

    #[test]
    fn crf_increasing_in_rate(a in 0.0..0.99f64, d in 1e-4..0.01f64, n in 1..40u32) {
        prop_assert!(capital_recovery_factor(a + d, n).unwrap() > capital_recovery_factor(a, n).unwrap());
    }

    #[test]
    fn crf_decreasing_in_years(r in 0.0..0.3f64, n in 1..40u32) {
        prop_assert!(capital_recovery_factor(r, n + 1).unwrap() < capital_recovery_factor(r, n).unwrap());
    }
}

#[test]
fn crf_zero_rate_is_exact() {
    assert_eq!(capital_recovery_factor(0.0, 7).unwrap(), 1.0 / 7.0);
}

#[test]
fn away_cap_never_negative_on_bundled_rides() {
    let case = generate_synthetic_case(&SyntheticCaseParams::default());
    for r in &case.rides {
        let cap = away_energy_cap(r, case.away_power_kw, case.grid.step_hours);
        assert!(cap >= 0.0);
        assert_eq!(cap, case.away_power_kw * (r.ret - r.departure) as f64 * case.grid.step_hours);
    }
}

#[test]
fn default_case_validates_clean() {
    let case = generate_synthetic_case(&SyntheticCaseParams::default());
    let rep = validate_case(&case);
    assert!(rep.is_valid(), "{rep}");
    assert!(validate_case(&generate_synthetic_case(&SyntheticCaseParams::desk())).is_valid());
}

#[test]
fn cycle_is_reported() {
    let mut case = generate_synthetic_case(&SyntheticCaseParams::desk());
    case.network.buses[1].parent = Some(5);
    case.network.buses[5].parent = Some(1);
    let rep = validate_case(&case);
    assert!(rep.mentions("network.tree"), "{rep}");
}

#[test]
fn negative_load_is_reported() {
    let mut case = generate_synthetic_case(&SyntheticCaseParams::desk());
    case.members[3].load_kw[17] = -0.5;
    let rep = validate_case(&case);
    assert!(rep.mentions("members[3]"), "{rep}");
    assert!(!rep.is_valid());
}

#[test]
fn inverted_ride_is_reported() {
    let mut case = generate_synthetic_case(&SyntheticCaseParams::desk());
    let r = &mut case.rides[0];
    (r.departure, r.ret) = (r.ret + 1, r.departure);
    assert!(!validate_case(&case).is_valid());
}
