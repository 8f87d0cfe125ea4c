use pmd::transport::{
    solve_entropic, solve_exact, solve_exact_with, solve_oracle, InitialBasis, PivotRule,
    SimplexOptions, TransportProblem, MARGINAL_TOLERANCE,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_masses(rng: &mut ChaCha8Rng, k: usize, quantized: bool) -> Vec<f64> {
    let raw: Vec<f64> = (0..k)
        .map(|_| {
            if quantized {
                rng.gen_range(0..4) as f64
            } else {
                rng.gen_range(0.0..1.0)
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        return vec![1.0 / k as f64; k];
    }
    raw.iter().map(|x| x / total).collect()
}

/// Mixes continuous instances with quantized ones that have tied masses and costs.
fn random_problem(rng: &mut ChaCha8Rng, max_side: usize) -> TransportProblem {
    let m = rng.gen_range(1..=max_side);
    let n = rng.gen_range(1..=max_side);
    let quantized = rng.gen_bool(0.4);
    let supply = random_masses(rng, m, quantized);
    let demand = random_masses(rng, n, quantized);
    let cost = (0..m * n)
        .map(|_| {
            if quantized {
                rng.gen_range(0..3) as f64
            } else {
                rng.gen_range(0.0..1.0)
            }
        })
        .collect();
    TransportProblem::new(supply, demand, cost).unwrap()
}

/// Feasible couplings from random marginal-preserving mixing: a random
/// product coupling nudged by 2x2 exchanges that keep every row and column sum.
fn random_feasible(rng: &mut ChaCha8Rng, p: &TransportProblem) -> Vec<f64> {
    let (m, n) = (p.num_rows(), p.num_cols());
    let mut w: Vec<f64> = (0..m * n)
        .map(|k| p.supply()[k / n] * p.demand()[k % n])
        .collect();
    for _ in 0..20 {
        if m < 2 || n < 2 {
            break;
        }
        let (i1, i2) = (rng.gen_range(0..m), rng.gen_range(0..m));
        let (j1, j2) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i1 == i2 || j1 == j2 {
            continue;
        }
        let room = w[i1 * n + j2].min(w[i2 * n + j1]);
        let delta = rng.gen_range(0.0..=1.0) * room;
        w[i1 * n + j1] += delta;
        w[i2 * n + j2] += delta;
        w[i1 * n + j2] -= delta;
        w[i2 * n + j1] -= delta;
    }
    w
}

#[test]
fn exact_matches_oracle_under_every_option() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let p = random_problem(&mut rng, 6);
        let oracle = solve_oracle(&p).unwrap();
        assert!(oracle
            .coupling
            .is_feasible(p.supply(), p.demand(), 1e-9));
        for initial in [InitialBasis::NorthWest, InitialBasis::MinimumCost] {
            for pivot in [PivotRule::Bland, PivotRule::BlockSearch] {
                let s = solve_exact_with(&p, SimplexOptions { initial, pivot }).unwrap();
                assert!(
                    (s.optimal_cost - oracle.optimal_cost).abs() <= 1e-7,
                    "{initial:?}/{pivot:?}: {} vs {}",
                    s.optimal_cost,
                    oracle.optimal_cost
                );
                assert!(s
                    .coupling
                    .is_feasible(p.supply(), p.demand(), MARGINAL_TOLERANCE));
                assert!((p.objective(&s.coupling.weights) - s.optimal_cost).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn exact_beats_random_feasible_couplings() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let p = random_problem(&mut rng, 8);
        let best = solve_exact(&p).unwrap().optimal_cost;
        for _ in 0..50 {
            let w = random_feasible(&mut rng, &p);
            assert!(best <= p.objective(&w) + 1e-12);
        }
    }
}

#[test]
fn larger_instances_are_feasible_and_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let p = random_problem(&mut rng, 60);
        let a = solve_exact(&p).unwrap();
        let b = solve_exact(&p).unwrap();
        assert_eq!(a, b);
        assert!(a.coupling.is_feasible(p.supply(), p.demand(), MARGINAL_TOLERANCE));
        let bland = solve_exact_with(
            &p,
            SimplexOptions {
                initial: InitialBasis::NorthWest,
                pivot: PivotRule::Bland,
            },
        )
        .unwrap();
        assert!((a.optimal_cost - bland.optimal_cost).abs() < 1e-9);
    }
}

#[test]
fn entropic_approaches_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..10 {
        let m = 5;
        let supply = random_masses(&mut rng, m, false);
        let demand = random_masses(&mut rng, m, false);
        let cost = (0..m * m).map(|_| rng.gen_range(0.0..1.0)).collect();
        let p = TransportProblem::new(supply, demand, cost).unwrap();
        let exact = solve_exact(&p).unwrap().optimal_cost;
        let mut last_gap = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let s = solve_entropic(&p, eps, 200_000).unwrap();
            assert!(s.coupling.is_feasible(p.supply(), p.demand(), 1e-6));
            let gap = s.optimal_cost - exact;
            assert!(gap >= -1e-9, "entropic cost below exact optimum");
            assert!(gap <= last_gap + 1e-12);
            last_gap = gap;
        }
        assert!(last_gap <= 1e-2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_under_transpose(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, 7);
        let forward = solve_exact(&p).unwrap().optimal_cost;
        let backward = solve_exact(&p.transposed()).unwrap().optimal_cost;
        prop_assert!((forward - backward).abs() <= 1e-9);
    }

    #[test]
    fn oracle_agrees(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, 6);
        let exact = solve_exact(&p).unwrap().optimal_cost;
        let oracle = solve_oracle(&p).unwrap().optimal_cost;
        prop_assert!((exact - oracle).abs() <= 1e-7);
    }
}
