//! Runs a small sweep on generated MovieLens-100k-shaped data.
//!
//! `cargo run --release --example synthetic_sweep -- [fractions] [reps]`

use std::time::Instant;

use pmd::datasets::build_item_metric;
use pmd::datasets::synthetic::{generate, SyntheticSpec};
use pmd::evaluation::{run_sweep, SweepConfig};
use pmd::metric::DistanceMode;

fn main() {
    env_logger_lite();
    let args: Vec<String> = std::env::args().collect();
    let fractions: Vec<f64> = args
        .get(1)
        .map(|s| s.split(',').map(|f| f.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![0.8, 0.1]);
    let reps: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1);

    let started = Instant::now();
    let (data, genome) = generate(&SyntheticSpec::movielens_100k_like(7)).unwrap();
    let metric = build_item_metric(&genome, DistanceMode::Arccos, None).unwrap().metric;
    println!(
        "{} ratings, metric built in {:.1}s",
        data.ratings.num_ratings(),
        started.elapsed().as_secs_f64()
    );
    let config = SweepConfig {
        measures: vec!["pmd".into(), "cos".into(), "user-mean".into()],
        fractions,
        ks: vec![5, 40],
        repetitions: reps,
        ..SweepConfig::default()
    };
    let report = run_sweep(&data.ratings, Some(&metric), &config).unwrap();
    print!("{}", report.render_summary());
    for r in report.rows.iter().filter(|r| r.k == 40) {
        println!("{} f={} rep={} wall={:.1}s", r.measure, r.fraction, r.rep, r.wall_time_s);
    }
}

fn env_logger_lite() {}
