use fleetplan_engine::{
    ClarabelBackend, Engine, HighsBackend, Program, RotatedCone, RowTag, SolveOptions, SolveStatus,
};

const T: RowTag = RowTag("test");

/// Single line feeding a PQ load from a 1.0 p.u. slack; pays for imports.
struct Feeder {
    program: Program,
    p: usize,
}

fn two_bus(load_p: f64, load_q: f64, r: f64, x: f64) -> Feeder {
    let mut m = Program::new();
    let p = m.add_column(-10.0, 10.0, false, 1.0);
    let q = m.add_column(-10.0, 10.0, false, 0.0);
    let i = m.add_column(0.0, 10.0, false, 0.0);
    let v0 = m.add_column(1.0, 1.0, false, 0.0);
    let v1 = m.add_column(0.81, 1.21, false, 0.0);
    m.add_eq(T, vec![(p, 1.0), (i, -r)], load_p);
    m.add_eq(T, vec![(q, 1.0), (i, -x)], load_q);
    m.add_eq(
        T,
        vec![(v1, 1.0), (v0, -1.0), (p, 2.0 * r), (q, 2.0 * x), (i, -(r * r + x * x))],
        0.0,
    );
    m.add_cone(RotatedCone {
        current: i,
        voltage: v0,
        p,
        q,
        key: 1,
        tag: T,
    });
    Feeder { program: m, p }
}

/// Smaller root of `i = (P + R i)² + (Q + X i)²`.
fn closed_form_import(load_p: f64, load_q: f64, r: f64, x: f64) -> f64 {
    let a = r * r + x * x;
    let b = 2.0 * load_p * r + 2.0 * load_q * x - 1.0;
    let c = load_p * load_p + load_q * load_q;
    let i = (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
    load_p + r * i
}

/// Chain of `n` line buses over `periods` periods with an optional local
/// generator per bus that costs `fixed` when switched on (binary).
fn chain(n: usize, periods: usize, with_binaries: bool) -> Program {
    let mut m = Program::new();
    let r = 0.05;
    let x = 0.02;
    let on: Vec<usize> = (0..n)
        .map(|b| {
            if with_binaries {
                m.add_column(0.0, 1.0, true, 0.02 + 0.01 * b as f64)
            } else {
                m.add_column(0.0, 1.0, false, 0.0)
            }
        })
        .collect();
    for t in 0..periods {
        let price = 1.0 + 0.5 * (t as f64 * 1.3).sin();
        let v0 = m.add_column(1.0, 1.0, false, 0.0);
        let slack = m.add_column(-5.0, 5.0, false, price);
        let mut vs = vec![v0];
        let mut ps = Vec::new();
        for b in 0..n {
            let p = m.add_column(-5.0, 5.0, false, 0.0);
            let q = m.add_column(-5.0, 5.0, false, 0.0);
            let i = m.add_column(0.0, 25.0, false, 0.0);
            let v = m.add_column(0.81, 1.21, false, 0.0);
            let g = m.add_column(0.0, 0.3, false, 0.2);
            m.add_le(T, vec![(g, 1.0), (on[b], -0.3)], 0.0);
            m.add_cone(RotatedCone {
                current: i,
                voltage: vs[b],
                p,
                q,
                key: (t * n + b) as u64,
                tag: T,
            });
            m.add_eq(
                T,
                vec![(v, 1.0), (vs[b], -1.0), (p, 2.0 * r), (q, 2.0 * x), (i, -(r * r + x * x))],
                0.0,
            );
            vs.push(v);
            ps.push((p, q, i, g));
        }
        // Flow on line b feeds bus b+1 and everything beyond it.
        for b in 0..n {
            let (p, q, i, g) = ps[b];
            let load = 0.2 + 0.1 * ((b + t) % 3) as f64;
            let mut pt = vec![(p, 1.0), (i, -r), (g, 1.0)];
            let mut qt = vec![(q, 1.0), (i, -x)];
            if b + 1 < n {
                pt.push((ps[b + 1].0, -1.0));
                qt.push((ps[b + 1].1, -1.0));
            }
            m.add_eq(T, pt, load);
            m.add_eq(T, qt, 0.4 * load);
        }
        m.add_eq(T, vec![(slack, 1.0), (ps[0].0, -1.0)], 0.0);
    }
    m
}

fn highs() -> Engine {
    Engine::new(Box::new(HighsBackend))
}

fn clarabel() -> Engine {
    Engine::new(Box::new(ClarabelBackend))
}

#[test]
fn program_without_cones_needs_one_backend_call() {
    let mut m = Program::new();
    let x = m.add_column(0.0, 1.0, true, -1.0);
    let y = m.add_column(0.0, 1.0, false, -1.0);
    m.add_le(T, vec![(x, 1.0), (y, 1.0)], 1.5);
    let sol = highs().solve(&m).unwrap();
    assert_eq!(sol.backend_calls, 1);
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective + 1.5).abs() < 1e-9);
}

#[test]
fn two_bus_dispatch_matches_closed_form() {
    for &(lp, lq, r, x) in &[(0.05, 0.0375, 0.0625, 0.02), (0.4, 0.3, 0.1, 0.05), (0.0, 0.0, 0.1, 0.1)] {
        let expected = closed_form_import(lp, lq, r, x);
        let f = two_bus(lp, lq, r, x);
        for mut engine in [highs(), clarabel()] {
            let sol = engine.solve(&f.program).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal, "{}", engine.backend_name());
            assert!(sol.max_cone_violation <= 1e-6);
            assert!(
                (sol.values[f.p] - expected).abs() < 1e-5,
                "{}: {} vs {expected}",
                engine.backend_name(),
                sol.values[f.p]
            );
        }
    }
}

#[test]
fn native_and_outer_approximation_agree() {
    let continuous = chain(4, 6, false);
    let a = highs().solve(&continuous).unwrap();
    let b = clarabel().solve(&continuous).unwrap();
    assert_eq!(a.status, SolveStatus::Optimal);
    assert!((a.objective - b.objective).abs() <= 1e-4 * b.objective.abs().max(1.0));

    // Mixed-integer: enumerate the binaries for the native backend.
    let mixed = chain(3, 4, true);
    let oa = highs().solve(&mixed).unwrap();
    assert_eq!(oa.status, SolveStatus::Optimal);
    let ints: Vec<usize> = mixed.integer_columns().collect();
    let mut best = f64::INFINITY;
    for mask in 0..(1u32 << ints.len()) {
        let mut fixed = mixed.clone();
        for (k, &j) in ints.iter().enumerate() {
            let v = f64::from((mask >> k) & 1);
            fixed.columns[j].lower = v;
            fixed.columns[j].upper = v;
        }
        let s = clarabel().solve(&fixed).unwrap();
        if s.is_feasible() {
            best = best.min(s.objective);
        }
    }
    assert!(
        (oa.objective - best).abs() <= 1e-4 * best.abs().max(1.0),
        "{} vs {best}",
        oa.objective
    );
}

#[test]
fn relaxation_bounds_integer_optimum() {
    let mixed = chain(3, 4, true);
    let relaxed = highs().solve_relaxation(&mixed).unwrap();
    let full = highs().solve(&mixed).unwrap();
    assert!(relaxed.objective <= full.objective + 1e-7);

    let fixed = mixed.with_integers_fixed(&full.values);
    let relaxed_fixed = highs().solve_relaxation(&fixed).unwrap();
    assert!((relaxed_fixed.objective - full.objective).abs() <= 1e-6 * full.objective.abs().max(1.0));
}

#[test]
fn master_objective_is_monotone() {
    let mixed = chain(4, 6, true);
    let mut engine = highs().with_options(SolveOptions {
        lp_warmup_rounds: 0,
        ..SolveOptions::default()
    });
    let sol = engine.solve(&mixed).unwrap();
    let tol = engine.options.mip_gap;
    for w in sol.objective_history.windows(2) {
        assert!(w[1] >= w[0] - tol * w[0].abs().max(1.0), "{:?}", sol.objective_history);
    }
    let mut engine = highs();
    let sol = engine.solve(&mixed).unwrap();
    for w in sol.warmup_history.windows(2) {
        assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{:?}", sol.warmup_history);
    }
}

#[test]
fn warm_pool_resolve_is_idempotent() {
    let mixed = chain(3, 5, true);
    let mut engine = highs();
    let first = engine.solve(&mixed).unwrap();
    assert!(!engine.cut_pool().is_empty());
    let second = engine.solve(&mixed).unwrap();
    assert!(second.backend_calls <= first.backend_calls);
    assert!(
        (first.objective - second.objective).abs() <= 1e-8 * first.objective.abs().max(1.0),
        "{} vs {}",
        first.objective,
        second.objective
    );
}

#[test]
fn clarabel_refuses_free_integers() {
    let mixed = chain(2, 2, true);
    assert!(clarabel().solve(&mixed).is_err());
    assert!(clarabel().solve_relaxation(&mixed).is_ok());
}

#[test]
fn infeasible_program_reported() {
    let mut m = Program::new();
    let x = m.add_column(0.0, 1.0, false, 1.0);
    m.add_ge(T, vec![(x, 1.0)], 2.0);
    assert_eq!(highs().solve(&m).unwrap().status, SolveStatus::Infeasible);
    assert_eq!(clarabel().solve(&m).unwrap().status, SolveStatus::Infeasible);
}
