use proptest::prelude::*;
use rand::Rng;
use roughkit_core::controls::{
    check_p_to_zero, control_table, greedy_points, greedy_points_with, rough_path_controls, BlockPolicy, PairTable,
};
use roughkit_core::gaussian::{lift_path, rng_for, sample_fbm, uniform_grid};
use roughkit_core::tensor::{lift_points, RoughPathGrid};
use roughkit_core::{Execution, RoughError};

// Maximum over all 2^(k-i-1) grid partitions of [t_i, t_k].
fn brute_force(f: &PairTable, q: f64, r: f64, times: &[f64], i: usize, k: usize) -> f64 {
    if i == k {
        return 0.0;
    }
    let inner = k - i - 1;
    let mut best: f64 = 0.0;
    for mask in 0u32..(1 << inner) {
        let mut pts = vec![i];
        pts.extend((0..inner).filter(|b| mask & (1 << b) != 0).map(|b| i + 1 + b));
        pts.push(k);
        let s: f64 = pts.windows(2).map(|w| f.get(w[0], w[1]).powf(q) / (times[w[1]] - times[w[0]]).powf(r)).sum();
        best = best.max(s);
    }
    best
}

fn linear_path(m: usize, t_end: f64) -> RoughPathGrid {
    let times = uniform_grid(t_end, m);
    let pts: Vec<Vec<f64>> = times.iter().map(|t| vec![*t]).collect();
    lift_points(&times, &pts, 2).unwrap()
}

#[test]
fn dp_equals_exhaustive_enumeration() {
    for g in 0..20u64 {
        let mut rng = rng_for(2024, g);
        let n = rng.random_range(2..=10);
        let mut times = vec![0.0];
        for _ in 1..n {
            let last = *times.last().unwrap();
            times.push(last + rng.random_range(0.05..1.0));
        }
        let vals: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..2.0)).collect();
        let f = PairTable::from_fn(n, Execution::Sequential, |i, k| vals[i * n + k]);
        let q = rng.random_range(0.5..4.0);
        let r = rng.random_range(0.0..2.0);
        let w = control_table(&f, q, r, &times, Execution::Sequential).unwrap();
        for i in 0..n {
            for k in i..n {
                let b = brute_force(&f, q, r, &times, i, k);
                assert!((w.get(i, k) - b).abs() < 1e-12 * b.max(1.0), "germ {g}, ({i},{k}): {} vs {b}", w.get(i, k));
            }
        }
    }
}

#[test]
fn linear_path_closed_forms() {
    let x = linear_path(10, 1.0);
    let c = rough_path_controls(&x, 0.4, 0.3, Execution::Sequential).unwrap();
    assert!((c.level(1).get(0, 10) - 1.0).abs() < 1e-10);
    assert!((c.level(1).get(0, 5) - 0.5f64.powi(7)).abs() < 1e-10);
    assert!((c.level(2).get(0, 10) - 0.03125).abs() < 1e-10);
    // the DP agrees with enumeration on a 6-point grid too
    let y = linear_path(5, 1.0);
    let f = PairTable::from_fn(6, Execution::Sequential, |i, k| y.query(i, k).unwrap().level_norm(1));
    assert!((brute_force(&f, 10.0, 3.0, y.times(), 0, 5) - 1.0).abs() < 1e-12);
}

#[test]
fn zero_germs_and_unit_paths() {
    let times = uniform_grid(1.0, 6);
    let w = control_table(&PairTable::zeros(7), 2.0, 1.0, &times, Execution::Sequential).unwrap();
    assert!((0..7).all(|i| (i..7).all(|k| w.get(i, k) == 0.0)));
    let c = rough_path_controls(&RoughPathGrid::unit_path(times, 2, 3).unwrap(), 0.3, 0.25, Execution::Sequential).unwrap();
    assert_eq!(c.total.get(0, 6), 0.0);
    let chk = check_p_to_zero(&RoughPathGrid::unit_path(uniform_grid(1.0, 4), 1, 2).unwrap(), 0.4, 0.3, 0, 4, Execution::Sequential).unwrap();
    assert_eq!((chk.lhs, chk.rhs), (0.0, 0.0));
    assert!(chk.holds);
}

#[test]
fn errors_reported() {
    let times = uniform_grid(1.0, 2);
    let bad = PairTable::from_fn(3, Execution::Sequential, |_, _| -1.0);
    assert!(matches!(control_table(&bad, 1.0, 0.0, &times, Execution::Sequential), Err(RoughError::Domain { .. })));
    let huge = PairTable::from_fn(3, Execution::Sequential, |_, _| 1e300);
    assert!(matches!(control_table(&huge, 4.0, 0.0, &times, Execution::Sequential), Err(RoughError::Range { .. })));
    assert!(rough_path_controls(&linear_path(4, 1.0), 0.3, 0.3, Execution::Sequential).is_err());
}

#[test]
fn p_to_zero_linear_example() {
    let chk = check_p_to_zero(&linear_path(8, 1.0), 0.4, 0.3, 0, 8, Execution::Sequential).unwrap();
    assert!((chk.per_level[0].0 - 1.0).abs() < 1e-10);
    assert!(chk.per_level[0].0 <= chk.per_level[0].1 * (1.0 + 1e-12));
}

#[test]
fn fbm_tables_superadditive_and_monotone() {
    let times = uniform_grid(1.0, 64);
    for s in 0..5 {
        let x = lift_path(&sample_fbm(0.4, &times, 2, s).unwrap(), 2).unwrap();
        let c = rough_path_controls(&x, 0.35, 0.28, Execution::default()).unwrap();
        for t in c.levels.iter().chain([&c.total]) {
            assert!(t.superadditivity_defect() <= 1e-12);
            assert!(t.monotonicity_defect() <= 1e-12);
        }
        let mut rng = rng_for(77, s);
        for _ in 0..100 {
            let mut v = [rng.random_range(0..=64), rng.random_range(0..=64), rng.random_range(0..=64)];
            v.sort();
            let w = &c.total;
            assert!(w.get(v[0], v[1]) + w.get(v[1], v[2]) <= w.get(v[0], v[2]) * (1.0 + 1e-12) + 1e-300);
        }
    }
}

#[test]
fn parallel_and_sequential_tables_agree() {
    let x = lift_path(&sample_fbm(0.3, &uniform_grid(1.0, 40), 2, 8).unwrap(), 3).unwrap();
    let a = rough_path_controls(&x, 0.3, 0.25, Execution::Sequential).unwrap();
    let b = rough_path_controls(&x, 0.3, 0.25, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn greedy_synthetic_example() {
    // W^{1/2}(s,t) = t - s: germ t - s with term power 2 keeps the single interval optimal
    let times = uniform_grid(1.0, 10);
    let f = PairTable::from_fn(11, Execution::Sequential, |i, k| times[k] - times[i]);
    let w = control_table(&f, 2.0, 0.0, &times, Execution::Sequential).unwrap();
    let g = greedy_points(&w, 0.5, 0.3, 0, 10).unwrap();
    assert_eq!(g.points, vec![0, 3, 6, 9, 10]);
    assert_eq!(g.count(), 4);
    assert_eq!(greedy_points(&w, 0.5, 1.0, 0, 10).unwrap().count(), 1);
    assert!(matches!(greedy_points(&w, 0.5, 0.05, 0, 10), Err(RoughError::GreedyBlocked { cell: 0, .. })));
    let sat = greedy_points_with(&w, 0.5, 0.05, 0, 10, BlockPolicy::Saturate).unwrap();
    assert_eq!(sat.count(), 10);
    assert_eq!(sat.blocked.len(), 10);
    assert_eq!(g.to_csv().lines().next(), Some("m,tau_m"));
}

#[test]
fn greedy_monotone_in_chi_and_budget() {
    let times = uniform_grid(1e-8, 128);
    for s in 0..10 {
        let x = lift_path(&sample_fbm(0.4, &times, 2, s).unwrap(), 2).unwrap();
        let c = rough_path_controls(&x, 0.35, 0.28, Execution::default()).unwrap();
        let counts: Vec<usize> = [0.1, 0.2, 0.4]
            .iter()
            .map(|chi| {
                let g = greedy_points_with(&c.total, 0.07, *chi, 0, 128, BlockPolicy::Saturate).unwrap();
                let (lhs, budget) = g.budget_check(&c.total);
                assert!(lhs <= budget * (1.0 + 1e-12));
                for w in g.points.windows(2) {
                    assert!(w[1] == w[0] + 1 || c.total.powered(w[0], w[1], 0.07) <= chi * (1.0 + 1e-12));
                }
                g.count()
            })
            .collect();
        assert!(counts[0] >= counts[1] && counts[1] >= counts[2], "{counts:?}");
    }
}

#[test]
fn csv_dump_header() {
    let w = control_table(&PairTable::zeros(3), 1.0, 0.0, &uniform_grid(1.0, 2), Execution::Sequential).unwrap();
    assert!(w.to_csv().starts_with("i,k,t_i,t_k,W\n"));
}

proptest! {
    #[test]
    fn random_germs_superadditive(vals in prop::collection::vec(0.0..3.0f64, 64), q in 0.5..3.0f64, r in 0.0..1.5f64) {
        let n = 8;
        let times = uniform_grid(1.0, n - 1);
        let f = PairTable::from_fn(n, Execution::Sequential, |i, k| vals[i * n + k]);
        let w = control_table(&f, q, r, &times, Execution::Sequential).unwrap();
        prop_assert!(w.superadditivity_defect() <= 1e-12);
        prop_assert!(w.monotonicity_defect() <= 1e-12);
        prop_assert!((0..n).all(|i| w.get(i, i) == 0.0));
    }
}
