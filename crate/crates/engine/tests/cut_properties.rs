use fleetplan_engine::{ConePoint, Program, RotatedCone, RowTag};
use fleetplan_engine::{cone_violations, generate_cuts};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cone_sample(rng: &mut ChaCha8Rng) -> ConePoint {
    let p: f64 = rng.random_range(-3.0..3.0);
    let q: f64 = rng.random_range(-3.0..3.0);
    let v: f64 = rng.random_range(0.5..1.5);
    let i = (p * p + q * q) / v * (1.0 + rng.random_range(0.0..0.5));
    ConePoint::new(p, q, i, v)
}

fn one_cone_program() -> Program {
    let mut m = Program::new();
    let p = m.add_column(-10.0, 10.0, false, 0.0);
    let q = m.add_column(-10.0, 10.0, false, 0.0);
    let i = m.add_column(0.0, 100.0, false, 0.0);
    let v = m.add_column(0.0, 2.0, false, 0.0);
    m.add_cone(RotatedCone {
        current: i,
        voltage: v,
        p,
        q,
        key: 42,
        tag: RowTag("cone"),
    });
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cuts_separate_and_stay_valid(
        p in -3.0f64..3.0,
        q in -3.0f64..3.0,
        v in 0.0f64..1.5,
        shrink in 0.0f64..0.95,
        seed in any::<u64>(),
    ) {
        let flow = p * p + q * q;
        prop_assume!(flow > 1e-6);
        let i = if v > 0.0 { flow / v * shrink } else { 0.0 };
        let program = one_cone_program();
        let x = [p, q, i, v];
        let viol = cone_violations(&program, &x, 1e-9);
        prop_assume!(!viol.is_empty());
        let cuts = generate_cuts(&program, &viol);
        prop_assert_eq!(cuts.len(), 1);
        let cut = cuts[0].cut;
        prop_assert_eq!(cut.key, 42);
        prop_assert!(cut.evaluate(&ConePoint::new(p, q, i, v)) > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let s = cone_sample(&mut rng);
            prop_assert!(cut.evaluate(&s) <= 1e-9 * (1.0 + s.current + s.voltage));
        }
    }
}

#[test]
fn relative_violation_examples() {
    assert_eq!(ConePoint::new(3.0, 4.0, 25.0, 1.0).relative_violation(), 0.0);
    assert!((ConePoint::new(3.0, 4.0, 20.0, 1.0).relative_violation() - 0.2).abs() < 1e-15);
    let program = one_cone_program();
    assert!(cone_violations(&program, &[3.0, 4.0, 30.0, 1.0], 1e-6).is_empty());
    assert_eq!(cone_violations(&program, &[3.0, 4.0, 20.0, 1.0], 1e-6).len(), 1);
}
