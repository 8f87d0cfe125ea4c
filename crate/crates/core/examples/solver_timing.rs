//! Times the exact solver on random preference pairs over a cosine item metric.
//!
//! `cargo run --release -p pmd --example solver_timing -- 100 200`

use std::time::Instant;

use pmd::metric::{CosineItemMetric, DenseItemMetric, DistanceMode};
use pmd::model::Preference;
use pmd::transport::{solve_exact_with, InitialBasis, PivotRule, SimplexOptions, TransportProblem};
use rand::{seq::index::sample, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let sizes: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("support size"))
        .collect();
    let sizes = if sizes.is_empty() { vec![50, 100, 200] } else { sizes };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let items = 1500;
    let vectors = (0..items)
        .map(|_| Some((0..64).map(|_| rng.gen_range(0.0f64..1.0).powi(3)).collect()))
        .collect();
    let lazy = CosineItemMetric::new(vectors, DistanceMode::Arccos).unwrap();
    let metric = DenseItemMetric::materialize(&lazy);
    let preference = |k: usize, rng: &mut ChaCha8Rng| {
        let mut support: Vec<u32> = sample(rng, items, k).into_iter().map(|i| i as u32).collect();
        support.sort_unstable();
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(1..=5) as f64).collect();
        let total: f64 = raw.iter().sum();
        let mut mass: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let residue = 1.0 - mass.iter().sum::<f64>();
        mass[0] += residue;
        Preference::new(support, mass).unwrap()
    };
    for k in sizes {
        let reps = (20_000 / (k * k / 10).max(1)).clamp(3, 500);
        let pairs: Vec<_> = (0..reps)
            .map(|_| (preference(k, &mut rng), preference(k, &mut rng)))
            .collect();
        for (initial, pivot) in [
            (InitialBasis::MinimumCost, PivotRule::BlockSearch),
            (InitialBasis::NorthWest, PivotRule::BlockSearch),
            (InitialBasis::MinimumCost, PivotRule::Bland),
        ] {
            let start = Instant::now();
            let mut pivots = 0;
            for (a, b) in &pairs {
                let p = TransportProblem::between(a, b, &metric).unwrap();
                pivots += solve_exact_with(&p, SimplexOptions { initial, pivot }).unwrap().iterations;
            }
            let per = start.elapsed().as_secs_f64() / reps as f64;
            println!(
                "k={k:4} {initial:?}/{pivot:?}: {:.3} ms/pair, {} pivots/pair",
                per * 1e3,
                pivots / reps
            );
        }
    }
}
