//! Item ground distances.
//!
//! Two backends sit behind the [`ItemMetric`] trait: [`DenseItemMetric`]
//! materializes the strictly-lower triangle of the distance matrix, and
//! [`CosineItemMetric`] computes cosine distances from feature vectors on
//! demand. Both derive distances from similarities through a
//! [`DistanceMode`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ItemId;

/// Slack allowed by the triangle-inequality sampler.
pub const TRIANGLE_TOLERANCE: f64 = 1e-9;
/// Number of random triples checked by default.
pub const DEFAULT_TRIANGLE_SAMPLES: usize = 10_000;
const TRIANGLE_SEED: u64 = 0x7269_616e_676c_65;

/// How a similarity in `[-1, 1]` becomes a distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    /// `d = arccos(s)`: the angle between the underlying vectors, a metric.
    Arccos,
    /// `d = 1 - s`: not a metric in general.
    OneMinus,
}

impl DistanceMode {
    pub fn distance(self, similarity: f64) -> f64 {
        match self {
            DistanceMode::Arccos => similarity.clamp(-1.0, 1.0).acos(),
            DistanceMode::OneMinus => (1.0 - similarity).max(0.0),
        }
    }

    pub fn similarity(self, distance: f64) -> f64 {
        match self {
            DistanceMode::Arccos => distance.cos(),
            DistanceMode::OneMinus => 1.0 - distance,
        }
    }

    /// Conventional distance bound used to turn distances into weights.
    pub fn nominal_max(self) -> f64 {
        match self {
            DistanceMode::Arccos => PI,
            DistanceMode::OneMinus => 1.0,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            DistanceMode::Arccos => "arccos",
            DistanceMode::OneMinus => "one-minus",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            DistanceMode::Arccos => 0,
            DistanceMode::OneMinus => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DistanceMode::Arccos),
            1 => Some(DistanceMode::OneMinus),
            _ => None,
        }
    }
}

impl fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arccos" => Ok(DistanceMode::Arccos),
            "one-minus" => Ok(DistanceMode::OneMinus),
            other => Err(Error::Config(format!(
                "unknown metric mode {other:?} (expected arccos or one-minus)"
            ))),
        }
    }
}

/// Pairwise item distances `d(i, j)`.
///
/// Implementations must be symmetric with a zero diagonal and bounded by
/// [`d_max`](ItemMetric::d_max).
pub trait ItemMetric: Send + Sync {
    fn num_items(&self) -> usize;

    fn distance(&self, i: ItemId, j: ItemId) -> f64;

    /// The similarity the distance was derived from.
    fn similarity(&self, i: ItemId, j: ItemId) -> f64 {
        self.mode().similarity(self.distance(i, j))
    }

    fn d_max(&self) -> f64;

    /// Whether the triangle inequality is known to hold.
    fn is_metric(&self) -> bool;

    fn mode(&self) -> DistanceMode;
}

#[inline]
fn lower_index(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

/// Materialized distances over `n` items, stored as the strict lower triangle.
#[derive(Clone, Debug)]
pub struct DenseItemMetric {
    n: usize,
    mode: DistanceMode,
    d_max: f64,
    is_metric: bool,
    lower: Vec<f64>,
}

impl DenseItemMetric {
    /// `lower` holds `d(i, j)` for `i > j` in row-major order.
    /// Metric status is established by the triangle sampler.
    pub fn from_lower(n: usize, mode: DistanceMode, d_max: f64, lower: Vec<f64>) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if lower.len() != expected {
            return Err(Error::DimensionMismatch(expected, lower.len()));
        }
        if let Some(bad) = lower.iter().find(|d| !d.is_finite() || **d < 0.0 || **d > d_max) {
            return Err(Error::InvalidDistance {
                distance: *bad,
                d_max,
            });
        }
        let mut metric = DenseItemMetric {
            n,
            mode,
            d_max,
            is_metric: false,
            lower,
        };
        metric.is_metric = verify_triangle(&metric, DEFAULT_TRIANGLE_SAMPLES, TRIANGLE_SEED).holds();
        Ok(metric)
    }

    /// Materializes any metric, e.g. a lazy one, into dense storage.
    pub fn materialize(metric: &dyn ItemMetric) -> Self {
        use rayon::prelude::*;
        let n = metric.num_items();
        let rows: Vec<Vec<f64>> = (1..n)
            .into_par_iter()
            .map(|i| (0..i).map(|j| metric.distance(i as ItemId, j as ItemId)).collect())
            .collect();
        DenseItemMetric {
            n,
            mode: metric.mode(),
            d_max: metric.d_max(),
            is_metric: metric.is_metric(),
            lower: rows.into_iter().flatten().collect(),
        }
    }

    /// Reassembles a metric whose entries and metric status were checked
    /// when it was first built.
    pub(crate) fn from_parts(
        n: usize,
        mode: DistanceMode,
        d_max: f64,
        is_metric: bool,
        lower: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(lower.len(), n * n.saturating_sub(1) / 2);
        DenseItemMetric {
            n,
            mode,
            d_max,
            is_metric,
            lower,
        }
    }

    pub(crate) fn lower(&self) -> &[f64] {
        &self.lower
    }
}

impl ItemMetric for DenseItemMetric {
    fn num_items(&self) -> usize {
        self.n
    }

    #[inline]
    fn distance(&self, i: ItemId, j: ItemId) -> f64 {
        let (i, j) = (i as usize, j as usize);
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => self.lower[lower_index(i, j)],
            std::cmp::Ordering::Less => self.lower[lower_index(j, i)],
        }
    }

    fn d_max(&self) -> f64 {
        self.d_max
    }

    fn is_metric(&self) -> bool {
        self.is_metric
    }

    fn mode(&self) -> DistanceMode {
        self.mode
    }
}

/// A symmetric item-similarity table with unit diagonal.
#[derive(Clone, Debug)]
pub struct SimilarityTable {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityTable {
    /// `values` is the full row-major `n x n` matrix.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch(n * n, values.len()));
        }
        for i in 0..n {
            for j in 0..n {
                let s = values[i * n + j];
                if !s.is_finite() || !(-1.0..=1.0).contains(&s) {
                    return Err(Error::InvalidSimilarity(format!(
                        "similarity {s} at ({i}, {j}) outside [-1, 1]"
                    )));
                }
                if s != values[j * n + i] {
                    return Err(Error::InvalidSimilarity(format!(
                        "table is not symmetric at ({i}, {j})"
                    )));
                }
            }
            if values[i * n + i] != 1.0 {
                return Err(Error::InvalidSimilarity(format!(
                    "self-similarity of item {i} is {}, not 1",
                    values[i * n + i]
                )));
            }
        }
        Ok(SimilarityTable { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: ItemId, j: ItemId) -> f64 {
        self.values[i as usize * self.n + j as usize]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(1.0, f64::min)
    }
}

/// Converts a similarity table into distances under `mode`.
pub fn item_metric_from_similarity(
    sim: &SimilarityTable,
    mode: DistanceMode,
) -> Result<DenseItemMetric> {
    let n = sim.len();
    let mut lower = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 1..n {
        for j in 0..i {
            lower.push(mode.distance(sim.get(i as ItemId, j as ItemId)));
        }
    }
    let d_max = match mode {
        DistanceMode::Arccos => PI,
        DistanceMode::OneMinus => {
            let bound = 1.0 - sim.min();
            if bound > 0.0 {
                bound
            } else {
                1.0
            }
        }
    };
    DenseItemMetric::from_lower(n, mode, d_max, lower)
}

/// Cosine similarity `<a, b> / (|a| |b|)`.
pub fn cosine_of_vectors(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lazily evaluated cosine distances over nonnegative feature vectors.
///
/// Items without a vector sit at `d_max` from every other item.
#[derive(Clone, Debug)]
pub struct CosineItemMetric {
    vectors: Vec<Option<Vec<f64>>>,
    norms: Vec<f64>,
    mode: DistanceMode,
    is_metric: bool,
}

impl CosineItemMetric {
    pub fn new(vectors: Vec<Option<Vec<f64>>>, mode: DistanceMode) -> Result<Self> {
        let dim = vectors.iter().flatten().map(Vec::len).next();
        let mut norms = Vec::with_capacity(vectors.len());
        for v in &vectors {
            match v {
                Some(v) => {
                    if Some(v.len()) != dim {
                        return Err(Error::DimensionMismatch(dim.unwrap_or(0), v.len()));
                    }
                    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                        return Err(Error::Config(
                            "feature vectors must be finite and nonnegative".into(),
                        ));
                    }
                    let n = norm(v);
                    if n == 0.0 {
                        return Err(Error::DegenerateVector);
                    }
                    norms.push(n);
                }
                None => norms.push(0.0),
            }
        }
        let mut metric = CosineItemMetric {
            vectors,
            norms,
            mode,
            is_metric: mode == DistanceMode::Arccos,
        };
        if mode == DistanceMode::OneMinus {
            metric.is_metric =
                verify_triangle(&metric, DEFAULT_TRIANGLE_SAMPLES, TRIANGLE_SEED).holds();
        }
        Ok(metric)
    }

    /// Items that have no feature vector.
    pub fn missing(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.vectors
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| i as ItemId)
    }
}

impl ItemMetric for CosineItemMetric {
    fn num_items(&self) -> usize {
        self.vectors.len()
    }

    fn distance(&self, i: ItemId, j: ItemId) -> f64 {
        if i == j {
            return 0.0;
        }
        let (i, j) = (i as usize, j as usize);
        match (&self.vectors[i], &self.vectors[j]) {
            (Some(a), Some(b)) => {
                let cos = (dot(a, b) / (self.norms[i] * self.norms[j])).clamp(0.0, 1.0);
                self.mode.distance(cos)
            }
            _ => self.d_max(),
        }
    }

    fn similarity(&self, i: ItemId, j: ItemId) -> f64 {
        if i == j {
            return 1.0;
        }
        let (a, b) = (i as usize, j as usize);
        match (&self.vectors[a], &self.vectors[b]) {
            (Some(x), Some(y)) => (dot(x, y) / (self.norms[a] * self.norms[b])).clamp(0.0, 1.0),
            _ => 0.0,
        }
    }

    fn d_max(&self) -> f64 {
        // Nonnegative vectors have cosine in [0, 1].
        self.mode.nominal_max()
    }

    fn is_metric(&self) -> bool {
        self.is_metric
    }

    fn mode(&self) -> DistanceMode {
        self.mode
    }
}

/// Outcome of a triangle-inequality check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleCheck {
    pub triples: usize,
    pub violations: usize,
    /// Smallest `d(i,j) + d(j,k) - d(i,k)` seen.
    pub worst_slack: f64,
}

impl TriangleCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `d(i,k) <= d(i,j) + d(j,k) + 1e-9`.
///
/// Small metrics (at most `samples` ordered triples) are checked exhaustively;
/// larger ones on `samples` seeded random triples.
pub fn verify_triangle(metric: &dyn ItemMetric, samples: usize, seed: u64) -> TriangleCheck {
    let n = metric.num_items();
    let mut check = TriangleCheck {
        triples: 0,
        violations: 0,
        worst_slack: f64::INFINITY,
    };
    let mut visit = |i: ItemId, j: ItemId, k: ItemId| {
        let slack = metric.distance(i, j) + metric.distance(j, k) - metric.distance(i, k);
        check.triples += 1;
        check.worst_slack = check.worst_slack.min(slack);
        if slack < -TRIANGLE_TOLERANCE {
            check.violations += 1;
        }
    };
    if n == 0 {
        return check;
    }
    if n.saturating_pow(3) <= samples {
        for i in 0..n as ItemId {
            for j in 0..n as ItemId {
                for k in 0..n as ItemId {
                    visit(i, j, k);
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let i = rng.gen_range(0..n) as ItemId;
            let j = rng.gen_range(0..n) as ItemId;
            let k = rng.gen_range(0..n) as ItemId;
            visit(i, j, k);
        }
    }
    check
}
