use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use super::{SweepConfig, TestRating};
use crate::datasets::{read_score_cache, write_score_cache, Fingerprint};
use crate::error::{Error, Result};
use crate::measures::{Measure, MeasureContext, MeasureResult, ScoreKind};
use crate::metric::ItemMetric;
use crate::model::{SparseRatings, UserId};
use crate::recommender::{score_to_weight, PairWeights};

/// Scores of a measure on a set of user pairs, stored as a symmetric table.
#[derive(Clone, Debug)]
pub struct PairScores {
    n: usize,
    kind: ScoreKind,
    d_max: f64,
    /// Strict lower triangle; `NaN` = not scored or uncomputable.
    values: Vec<f64>,
}

fn slot(u: UserId, v: UserId) -> usize {
    let (hi, lo) = if u > v { (u, v) } else { (v, u) };
    let hi = hi as usize;
    hi * (hi - 1) / 2 + lo as usize
}

impl PairScores {
    fn empty(n: usize, kind: ScoreKind, d_max: f64) -> Self {
        PairScores {
            n,
            kind,
            d_max,
            values: vec![f64::NAN; n * n.saturating_sub(1) / 2],
        }
    }

    pub fn get(&self, u: UserId, v: UserId) -> Option<f64> {
        if u == v || u as usize >= self.n || v as usize >= self.n {
            return None;
        }
        let s = self.values[slot(u, v)];
        (!s.is_nan()).then_some(s)
    }

    fn set(&mut self, u: UserId, v: UserId, score: f64) {
        self.values[slot(u, v)] = score;
    }
}

impl PairWeights for PairScores {
    fn weight(&self, u: UserId, v: UserId) -> Result<Option<f64>> {
        Ok(self.get(u, v).and_then(|value| {
            let score = MeasureResult {
                value,
                kind: self.kind,
                computable: true,
            };
            score_to_weight(&score, self.d_max)
        }))
    }
}

/// Unordered pairs `(u, v)`, `u < v`, that some test rating may consult:
/// the target against every train rater of the item.
pub fn needed_pairs(train: &SparseRatings, test: &[TestRating]) -> Vec<(UserId, UserId)> {
    let n = train.num_users();
    let mut seen = vec![false; n * n.saturating_sub(1) / 2];
    let mut pairs = Vec::new();
    for t in test {
        if t.user as usize >= n || t.item as usize >= train.num_items() {
            continue;
        }
        for &v in train.item_raters(t.item) {
            if v == t.user {
                continue;
            }
            let s = slot(t.user, v);
            if !seen[s] {
                seen[s] = true;
                pairs.push((t.user.min(v), t.user.max(v)));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Where a pair-score cache lives and the key its contents must match.
pub struct CacheSpec {
    path: PathBuf,
    key: u64,
}

impl CacheSpec {
    pub fn new(
        dir: &Path,
        measure: Measure,
        train: &SparseRatings,
        metric_key: u64,
        config: &SweepConfig,
        fraction: f64,
        rep: usize,
    ) -> Self {
        let mut fp = Fingerprint::new();
        fp.bytes(measure.key().as_bytes());
        fp.u64(metric_key);
        fp.bytes(format!("{:?}/{:?}", config.solver, config.truncation).as_bytes());
        fp.u64(train.num_users() as u64);
        for (u, i, r) in train.entries() {
            fp.u64(((u as u64) << 32) | i as u64);
            fp.f64(r);
        }
        let key = fp.finish();
        let path = dir.join(format!(
            "{}-f{fraction}-r{rep}-{key:016x}.pmds",
            measure.key()
        ));
        CacheSpec { path, key }
    }
}

pub(crate) fn metric_fingerprint(metric: &dyn ItemMetric) -> u64 {
    let mut fp = Fingerprint::new();
    let n = metric.num_items();
    fp.u64(n as u64);
    fp.bytes(metric.mode().key().as_bytes());
    fp.f64(metric.d_max());
    for i in 1..n {
        for j in 0..i {
            fp.f64(metric.distance(i as u32, j as u32));
        }
    }
    fp.finish()
}

/// Scores every pair the test set needs, in parallel.
pub fn score_pairs(
    measure: Measure,
    ctx: &MeasureContext<'_>,
    test: &[TestRating],
    cache: Option<&CacheSpec>,
) -> Result<PairScores> {
    let train = ctx.ratings;
    let mut scores = PairScores::empty(train.num_users(), measure.kind(), measure.distance_bound(ctx));
    if let Some(cache) = cache {
        match read_score_cache(&cache.path, cache.key) {
            Ok(entries) => {
                log::info!("{}: loaded {} pair scores", cache.path.display(), entries.len());
                for (u, v, s) in entries {
                    if u as usize >= scores.n || v as usize >= scores.n || u == v {
                        return Err(Error::CacheInvalid {
                            path: cache.path.clone(),
                            reason: format!("pair ({u}, {v}) out of range"),
                        });
                    }
                    scores.set(u, v, s);
                }
                return Ok(scores);
            }
            Err(Error::Io { .. }) => {}
            Err(Error::CacheInvalid { reason, .. }) => {
                log::warn!("{} is invalid ({reason}); recomputing", cache.path.display());
            }
            Err(e) => return Err(e),
        }
    }

    let pairs = needed_pairs(train, test);
    let total = pairs.len();
    let done = AtomicUsize::new(0);
    let started = Instant::now();
    let step = (total / 20).max(1000);
    let computed: Vec<f64> = pairs
        .par_iter()
        .map(|&(u, v)| {
            let score = measure.score(ctx, u, v)?;
            let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
            if finished % step == 0 {
                let secs = started.elapsed().as_secs_f64().max(1e-9);
                log::info!(
                    "{}: {finished}/{total} pairs, {:.0} pairs/s",
                    measure.key(),
                    finished as f64 / secs
                );
            }
            Ok(score.value().unwrap_or(f64::NAN))
        })
        .collect::<Result<_>>()?;
    log::debug!(
        "{}: {total} pairs in {:.2}s",
        measure.key(),
        started.elapsed().as_secs_f64()
    );
    for (&(u, v), &s) in pairs.iter().zip(&computed) {
        scores.set(u, v, s);
    }
    if let Some(cache) = cache {
        let entries: Vec<_> = pairs
            .iter()
            .zip(&computed)
            .map(|(&(u, v), &s)| (u, v, s))
            .collect();
        write_score_cache(&cache.path, cache.key, &entries)?;
    }
    Ok(scores)
}
