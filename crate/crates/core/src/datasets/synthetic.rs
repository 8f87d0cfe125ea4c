//! Seeded rating data with latent genre structure, for smoke tests and timing.
//!
//! Items mix a few latent genres; their tag vectors and the users' ratings
//! both derive from that mixture, so item distances carry real signal about
//! who likes what. Popularity and activity are skewed like public rating sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, DatasetFormat, GenomeVectors, IdMap};
use crate::error::Result;
use crate::model::{RatingScale, SparseRatings};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    /// Target rating count; the minimum per user may push it slightly higher.
    pub ratings: usize,
    pub min_per_user: usize,
    pub genres: usize,
    pub tags: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Roughly the shape of MovieLens-100k.
    pub fn movielens_100k_like(seed: u64) -> Self {
        SyntheticSpec {
            users: 943,
            items: 1682,
            ratings: 100_000,
            min_per_user: 20,
            genres: 12,
            tags: 128,
            seed,
        }
    }

    pub fn small(seed: u64) -> Self {
        SyntheticSpec {
            users: 120,
            items: 200,
            ratings: 5_000,
            min_per_user: 10,
            genres: 6,
            tags: 32,
            seed,
        }
    }
}

fn exponential(rng: &mut ChaCha8Rng) -> f64 {
    -(1.0 - rng.gen::<f64>()).ln()
}

/// A sparse mixture: one dominant genre plus a little of the others.
fn mixture(rng: &mut ChaCha8Rng, genres: usize) -> Vec<f64> {
    let main = rng.gen_range(0..genres);
    let mut w: Vec<f64> = (0..genres).map(|_| 0.15 * exponential(rng)).collect();
    w[main] += 1.0 + exponential(rng);
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Draws `k` distinct indices with probability proportional to `weights`.
fn weighted_sample(rng: &mut ChaCha8Rng, weights: &[f64], k: usize) -> Vec<usize> {
    // Efraimidis-Spirakis keys: u^(1/w), keep the largest.
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| (rng.gen::<f64>().ln() / w, i))
        .collect();
    let k = k.min(keyed.len());
    if k == 0 {
        return Vec::new();
    }
    keyed.select_nth_unstable_by(k - 1, |a, b| b.0.total_cmp(&a.0));
    let mut picked: Vec<usize> = keyed[..k].iter().map(|&(_, i)| i).collect();
    picked.sort_unstable();
    picked
}

/// Ratings and tag vectors drawn from `spec`.
pub fn generate(spec: &SyntheticSpec) -> Result<(Dataset, GenomeVectors)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let g = spec.genres.max(1);
    let item_mix: Vec<Vec<f64>> = (0..spec.items).map(|_| mixture(&mut rng, g)).collect();
    let item_quality: Vec<f64> = (0..spec.items).map(|_| rng.gen_range(-0.6..0.6)).collect();
    // Zipf-like popularity.
    let popularity: Vec<f64> = (0..spec.items)
        .map(|r| 1.0 / (r as f64 + 10.0).powf(1.1))
        .collect();

    let loadings: Vec<Vec<f64>> = (0..spec.tags)
        .map(|_| (0..g).map(|_| rng.gen::<f64>().powi(3)).collect())
        .collect();
    let vectors: Vec<Option<Vec<f64>>> = item_mix
        .iter()
        .map(|mix| {
            let v: Vec<f64> = loadings
                .iter()
                .map(|l| {
                    let signal: f64 = l.iter().zip(mix).map(|(a, b)| a * b).sum();
                    (signal + 0.05 * rng.gen::<f64>()).clamp(0.0, 1.0)
                })
                .collect();
            Some(v)
        })
        .collect();

    // Activity: heavy-tailed, at least `min_per_user`.
    let raw_activity: Vec<f64> = (0..spec.users).map(|_| exponential(&mut rng).powi(2)).collect();
    let total_activity: f64 = raw_activity.iter().sum();
    let budget = spec.ratings.saturating_sub(spec.min_per_user * spec.users) as f64;

    let mut triplets = Vec::with_capacity(spec.ratings);
    for (u, act) in raw_activity.iter().enumerate() {
        let taste = mixture(&mut rng, g);
        let bias: f64 = rng.gen_range(-0.5..0.5);
        let count = (spec.min_per_user + (budget * act / total_activity).round() as usize)
            .min(spec.items);
        let weights: Vec<f64> = (0..spec.items)
            .map(|i| {
                let affinity: f64 = taste.iter().zip(&item_mix[i]).map(|(a, b)| a * b).sum();
                popularity[i] * (0.2 + affinity * g as f64)
            })
            .collect();
        for i in weighted_sample(&mut rng, &weights, count) {
            let affinity: f64 = taste.iter().zip(&item_mix[i]).map(|(a, b)| a * b).sum();
            let centered = affinity * g as f64 - 1.0;
            let noise: f64 = rng.gen_range(-0.8..0.8);
            let r = (3.4 + 0.9 * centered + bias + item_quality[i] + noise)
                .round()
                .clamp(1.0, 5.0);
            triplets.push((u as u32, i as u32, r));
        }
    }

    let ratings = SparseRatings::from_triplets(
        spec.users,
        spec.items,
        RatingScale::FIVE_STAR,
        triplets,
    )?;
    let users = IdMap::from_raw((1..=spec.users).map(|u| u.to_string()).collect())?;
    let items = IdMap::from_raw((1..=spec.items).map(|i| i.to_string()).collect())?;
    let dataset = Dataset {
        format: DatasetFormat::Csv,
        ratings,
        users,
        items,
    };
    let genome = GenomeVectors {
        dim: spec.tags,
        vectors,
    };
    Ok((dataset, genome))
}
