//! Hold-out splits, K-NN sweeps and mean absolute error.
//!
//! A sweep scores each needed user pair once per (measure, split) and reuses
//! the scores for every neighborhood size.

mod report;
mod scores;

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{EvalReport, EvalRow, SummaryRow};
pub use scores::{needed_pairs, score_pairs, CacheSpec, PairScores};

use crate::error::{Error, Result};
use crate::measures::{lookup, Measure, MeasureContext};
use crate::metric::ItemMetric;
use crate::model::{ItemId, SparseRatings, UserId};
use crate::recommender::{predict, Fallback, Neighbor, NeighborList, PairWeights, Prediction};
use crate::transport::Solver;

/// Report key of the rows that predict every rating with the user's mean.
pub const BASELINE_KEY: &str = "user-mean";

/// Train fractions from 4:1 down to 1:9.
pub const SPARSITY_FRACTIONS: [f64; 8] = [0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub repetitions: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, repetitions: usize, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        if repetitions == 0 {
            return Err(Error::Config("at least one repetition is required".into()));
        }
        Ok(SplitSpec {
            train_fraction,
            repetitions,
            seed,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRating {
    pub user: UserId,
    pub item: ItemId,
    pub rating: f64,
}

/// Uniform split of the rating entries.
///
/// The test set holds `floor((1 - f) N)` entries and the remainder trains.
/// The permutation depends only on `(seed, repetition)`, so test sets at
/// different fractions of the same repetition are nested.
pub fn split(
    ratings: &SparseRatings,
    spec: &SplitSpec,
    repetition: usize,
) -> (SparseRatings, Vec<TestRating>) {
    let n = ratings.num_ratings();
    let test_count = ((1.0 - spec.train_fraction) * n as f64 + 1e-9).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(repetition as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut in_test = vec![false; n];
    for &k in &order[..test_count] {
        in_test[k] = true;
    }
    let test = ratings
        .entries()
        .enumerate()
        .filter(|(k, _)| in_test[*k])
        .map(|(_, (user, item, rating))| TestRating { user, item, rating })
        .collect();
    let train = ratings.filter(|k| !in_test[k]);
    (train, test)
}

/// Mean absolute error over all predictions, fallbacks included.
pub fn mae(predictions: &[Prediction], truth: &[f64]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch(predictions.len(), truth.len()));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let total: f64 = predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| (p.value - t).abs())
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Share of predictions made from neighbors rather than a fallback.
pub fn coverage(predictions: &[Prediction]) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    let covered = predictions
        .iter()
        .filter(|p| p.fallback == Fallback::None)
        .count();
    covered as f64 / predictions.len() as f64
}

/// What to run. Measures are given by key; [`BASELINE_KEY`] adds the
/// user-mean rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub measures: Vec<String>,
    pub fractions: Vec<f64>,
    pub ks: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub solver: Solver,
    pub truncation: Option<usize>,
    /// Directory for PMD pair-score caches.
    pub score_cache: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            measures: vec!["pmd".into(), "cos".into()],
            fractions: vec![0.8],
            ks: vec![40],
            repetitions: 5,
            seed: 42,
            solver: Solver::Exact,
            truncation: None,
            score_cache: None,
        }
    }
}

enum Runner {
    Baseline,
    Measure(Measure),
}

impl SweepConfig {
    fn runners(&self, metric_available: bool) -> Result<Vec<(String, Runner)>> {
        if self.measures.is_empty() {
            return Err(Error::Config("no measures selected".into()));
        }
        if self.fractions.is_empty() || self.ks.is_empty() {
            return Err(Error::Config("fractions and K values must be non-empty".into()));
        }
        for &f in &self.fractions {
            SplitSpec::new(f, self.repetitions, self.seed)?;
        }
        if self.ks.contains(&0) {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.truncation == Some(0) {
            return Err(Error::Config("truncation must keep at least one item".into()));
        }
        let mut runners = Vec::new();
        for key in &self.measures {
            if key == BASELINE_KEY {
                runners.push((key.clone(), Runner::Baseline));
                continue;
            }
            let m = lookup(key)?;
            if m.needs_metric() && !metric_available {
                return Err(Error::MissingInput {
                    measure: m.key(),
                    requirement: "an item metric",
                });
            }
            runners.push((m.key().to_string(), Runner::Measure(m)));
        }
        Ok(runners)
    }

    /// Truncated preferences or an entropic solver make PMD values approximate.
    pub fn is_approximate(&self) -> bool {
        self.truncation.is_some() || !self.solver.is_exact()
    }
}

/// Every test rating's usable candidates, best first.
fn ranked_candidates(
    train: &SparseRatings,
    test: &[TestRating],
    weights: &(impl PairWeights + ?Sized),
) -> Result<Vec<Vec<Neighbor>>> {
    test.par_iter()
        .map(|t| {
            let mut list = Vec::new();
            if (t.user as usize) < train.num_users() && (t.item as usize) < train.num_items() {
                for &v in train.item_raters(t.item) {
                    if v == t.user {
                        continue;
                    }
                    if let Some(weight) = weights.weight(t.user, v)? {
                        list.push(Neighbor { user: v, weight });
                    }
                }
            }
            Ok(NeighborList::new(t.user, usize::MAX, list).entries().to_vec())
        })
        .collect()
}

fn predict_at_k(
    train: &SparseRatings,
    test: &[TestRating],
    ranked: &[Vec<Neighbor>],
    k: usize,
) -> Vec<Prediction> {
    test.par_iter()
        .zip(ranked)
        .map(|(t, cands)| {
            let top = &cands[..cands.len().min(k)];
            let list = NeighborList::new(t.user, k, top.to_vec());
            predict(t.user, t.item, &list, train)
        })
        .collect()
}

/// Full factorial sweep over measures, fractions, K and repetitions.
///
/// A failure while scoring one (measure, split) is recorded on its rows as a
/// `NaN` MAE with the error message, and the sweep moves on.
pub fn run_sweep(
    ratings: &SparseRatings,
    metric: Option<&dyn ItemMetric>,
    config: &SweepConfig,
) -> Result<EvalReport> {
    let runners = config.runners(metric.is_some())?;
    let metric_key = match (&config.score_cache, metric) {
        (Some(_), Some(m)) => Some(scores::metric_fingerprint(m)),
        _ => None,
    };
    let mut rows = Vec::new();
    for &fraction in &config.fractions {
        let spec = SplitSpec::new(fraction, config.repetitions, config.seed)?;
        for rep in 0..config.repetitions {
            let (train, test) = split(ratings, &spec, rep);
            if test.is_empty() {
                return Err(Error::EmptyTestSet);
            }
            let truth: Vec<f64> = test.iter().map(|t| t.rating).collect();
            log::info!(
                "fraction {fraction}, repetition {rep}: {} train, {} test ratings",
                train.num_ratings(),
                test.len()
            );
            for (key, runner) in &runners {
                let started = Instant::now();
                let ranked = match runner {
                    Runner::Baseline => Ok(vec![Vec::new(); test.len()]),
                    Runner::Measure(m) => {
                        let mut ctx = MeasureContext::new(&train)
                            .with_solver(config.solver)
                            .with_truncation(config.truncation);
                        if let Some(metric) = metric {
                            ctx = ctx.with_metric(metric);
                        }
                        let cache = match (&config.score_cache, metric_key) {
                            (Some(dir), Some(mk)) if *m == Measure::Pmd => {
                                Some(scores::CacheSpec::new(dir, *m, &train, mk, config, fraction, rep))
                            }
                            _ => None,
                        };
                        score_pairs(*m, &ctx, &test, cache.as_ref())
                            .and_then(|scores| ranked_candidates(&train, &test, &scores))
                    }
                };
                let scoring_time = started.elapsed().as_secs_f64();
                for &k in &config.ks {
                    let cell_started = Instant::now();
                    let row = match &ranked {
                        Ok(ranked) => {
                            let predictions = predict_at_k(&train, &test, ranked, k);
                            EvalRow {
                                measure: key.clone(),
                                fraction,
                                k,
                                rep,
                                mae: mae(&predictions, &truth)?,
                                coverage: coverage(&predictions),
                                wall_time_s: scoring_time + cell_started.elapsed().as_secs_f64(),
                                error: None,
                            }
                        }
                        Err(e) => {
                            log::error!("{key} at fraction {fraction}, repetition {rep}: {e}");
                            EvalRow {
                                measure: key.clone(),
                                fraction,
                                k,
                                rep,
                                mae: f64::NAN,
                                coverage: f64::NAN,
                                wall_time_s: scoring_time,
                                error: Some(e.to_string()),
                            }
                        }
                    };
                    rows.push(row);
                }
            }
        }
    }
    Ok(EvalReport {
        config: config.clone(),
        approximate: config.is_approximate(),
        rows,
    })
}
