#![allow(dead_code)]

use pmd::metric::{DenseItemMetric, DistanceMode};
use pmd::model::{RatingScale, SparseRatings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Angles between random unit vectors in R^5: a metric with `d_max = pi`.
pub fn random_arccos_metric(n: usize, seed: u64) -> DenseItemMetric {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / norm).collect()
        })
        .collect();
    let mut lower = Vec::new();
    for i in 1..n {
        for j in 0..i {
            let cos: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
            lower.push(cos.clamp(-1.0, 1.0).acos());
        }
    }
    DenseItemMetric::from_lower(n, DistanceMode::Arccos, std::f64::consts::PI, lower).unwrap()
}

/// `users` users, each rating between one and `max_support` random items.
pub fn random_ratings(rng: &mut ChaCha8Rng, users: usize, items: usize, max_support: usize) -> SparseRatings {
    let mut triplets = Vec::new();
    for u in 0..users {
        let k = rng.gen_range(1..=max_support.min(items));
        let mut picked: Vec<u32> = (0..items as u32).collect();
        for s in 0..k {
            let t = rng.gen_range(s..items);
            picked.swap(s, t);
        }
        for &i in &picked[..k] {
            triplets.push((u as u32, i, rng.gen_range(1..=5) as f64));
        }
    }
    SparseRatings::from_triplets(users, items, RatingScale::FIVE_STAR, triplets).unwrap()
}
