//! Pairwise user scores behind one interface.
//!
//! Every measure returns a [`MeasureResult`]. Measures that depend on
//! co-rated items report `computable = false` instead of a placeholder value
//! when the pair has nothing in common.

mod bcf;
mod classic;
mod pmd;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bcf::{bcf_family_sim, ItemSimilarity, KernelContext, RatingKernel};
pub use classic::{cos_sim, jaccard_sim, jmsd_sim, msd_dist, nhsm_sim, pcc_sim, urp_sim};
pub use pmd::{pmd, pmd_solution};

use crate::error::{Error, Result};
use crate::metric::ItemMetric;
use crate::model::{SparseRatings, UserId};
use crate::transport::Solver;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Similarity,
    Distance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureResult {
    /// Meaningless when `computable` is false.
    pub value: f64,
    pub kind: ScoreKind,
    pub computable: bool,
}

impl MeasureResult {
    pub fn similarity(value: f64) -> Self {
        MeasureResult {
            value,
            kind: ScoreKind::Similarity,
            computable: true,
        }
    }

    pub fn distance(value: f64) -> Self {
        MeasureResult {
            value: value.max(0.0),
            kind: ScoreKind::Distance,
            computable: true,
        }
    }

    pub fn uncomputable(kind: ScoreKind) -> Self {
        MeasureResult {
            value: f64::NAN,
            kind,
            computable: false,
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.computable.then_some(self.value)
    }

    /// `1 - distance` for distances, the value itself for similarities.
    pub fn as_similarity(&self) -> Option<f64> {
        self.value().map(|v| match self.kind {
            ScoreKind::Similarity => v,
            ScoreKind::Distance => 1.0 - v,
        })
    }
}

/// Inputs shared by all measures.
#[derive(Clone, Copy)]
pub struct MeasureContext<'a> {
    pub ratings: &'a SparseRatings,
    /// Item ground distances, needed by PMD and the BCF family.
    pub metric: Option<&'a dyn ItemMetric>,
    pub solver: Solver,
    /// Keep only the heaviest items of each preference before solving.
    pub truncation: Option<usize>,
}

impl<'a> MeasureContext<'a> {
    pub fn new(ratings: &'a SparseRatings) -> Self {
        MeasureContext {
            ratings,
            metric: None,
            solver: Solver::Exact,
            truncation: None,
        }
    }

    pub fn with_metric(mut self, metric: &'a dyn ItemMetric) -> Self {
        self.metric = Some(metric);
        self
    }

    pub fn with_solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_truncation(mut self, truncation: Option<usize>) -> Self {
        self.truncation = truncation;
        self
    }

    fn require_metric(&self, measure: Measure) -> Result<&'a dyn ItemMetric> {
        self.metric.ok_or(Error::MissingInput {
            measure: measure.key(),
            requirement: "an item metric",
        })
    }
}

/// The registered measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    Cos,
    Pcc,
    Msd,
    Jaccard,
    Urp,
    Jmsd,
    Nhsm,
    Bcf,
    NBcf,
    Husm,
    NHusm,
    Pmd,
}

impl Measure {
    pub const ALL: [Measure; 12] = [
        Measure::Cos,
        Measure::Pcc,
        Measure::Msd,
        Measure::Jaccard,
        Measure::Urp,
        Measure::Jmsd,
        Measure::Nhsm,
        Measure::Bcf,
        Measure::NBcf,
        Measure::Husm,
        Measure::NHusm,
        Measure::Pmd,
    ];

    /// Stable lowercase key used by the CLI and in reports.
    pub fn key(self) -> &'static str {
        match self {
            Measure::Cos => "cos",
            Measure::Pcc => "pcc",
            Measure::Msd => "msd",
            Measure::Jaccard => "jaccard",
            Measure::Urp => "urp",
            Measure::Jmsd => "jmsd",
            Measure::Nhsm => "nhsm",
            Measure::Bcf => "bcf",
            Measure::NBcf => "n-bcf",
            Measure::Husm => "husm",
            Measure::NHusm => "n-husm",
            Measure::Pmd => "pmd",
        }
    }

    pub fn kind(self) -> ScoreKind {
        match self {
            Measure::Msd | Measure::Pmd => ScoreKind::Distance,
            _ => ScoreKind::Similarity,
        }
    }

    pub fn needs_metric(self) -> bool {
        matches!(
            self,
            Measure::Bcf | Measure::NBcf | Measure::Husm | Measure::NHusm | Measure::Pmd
        )
    }

    /// Kernel and normalization of the BCF-form measures.
    pub fn bcf_form(self) -> Option<(RatingKernel, bool)> {
        match self {
            Measure::Bcf => Some((RatingKernel::AGREEMENT, false)),
            Measure::NBcf => Some((RatingKernel::AGREEMENT, true)),
            Measure::Husm => Some((RatingKernel::SIGMOID_AGREEMENT, false)),
            Measure::NHusm => Some((RatingKernel::SIGMOID_AGREEMENT, true)),
            _ => None,
        }
    }

    pub fn score(self, ctx: &MeasureContext<'_>, u: UserId, v: UserId) -> Result<MeasureResult> {
        let r = ctx.ratings;
        match self {
            Measure::Cos => cos_sim(u, v, r),
            Measure::Pcc => pcc_sim(u, v, r),
            Measure::Msd => msd_dist(u, v, r),
            Measure::Jaccard => jaccard_sim(u, v, r),
            Measure::Urp => urp_sim(u, v, r),
            Measure::Jmsd => jmsd_sim(u, v, r),
            Measure::Nhsm => nhsm_sim(u, v, r),
            Measure::Bcf | Measure::NBcf | Measure::Husm | Measure::NHusm => {
                let metric = ctx.require_metric(self)?;
                let (kernel, normalized) = self.bcf_form().expect("BCF-form measure");
                bcf_family_sim(u, v, r, metric, kernel, normalized)
            }
            Measure::Pmd => pmd(u, v, ctx),
        }
    }

    /// Distance bound used to turn this measure's distances into weights.
    pub fn distance_bound(self, ctx: &MeasureContext<'_>) -> f64 {
        match self {
            Measure::Pmd => ctx
                .metric
                .map_or(1.0, |m| m.d_max().max(m.mode().nominal_max())),
            _ => 1.0,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        lookup(s)
    }
}

pub struct CatalogEntry {
    pub key: &'static str,
    pub kind: ScoreKind,
    pub measure: Measure,
}

/// All registered measures in a fixed order.
pub fn measure_catalog() -> Vec<CatalogEntry> {
    Measure::ALL
        .iter()
        .map(|&measure| CatalogEntry {
            key: measure.key(),
            kind: measure.kind(),
            measure,
        })
        .collect()
}

pub fn lookup(key: &str) -> Result<Measure> {
    let key = key.trim().to_ascii_lowercase();
    Measure::ALL
        .iter()
        .copied()
        .find(|m| m.key() == key)
        .ok_or(Error::UnknownMeasure(key))
}

/// Items rated by both users as `(r_u, r_v)` pairs, plus the union size.
pub(crate) fn co_rated(ratings: &SparseRatings, u: UserId, v: UserId) -> (Vec<(f64, f64)>, usize) {
    let (iu, ru) = (ratings.user_items(u), ratings.user_ratings(u));
    let (iv, rv) = (ratings.user_items(v), ratings.user_ratings(v));
    let mut pairs = Vec::new();
    let (mut a, mut b) = (0, 0);
    while a < iu.len() && b < iv.len() {
        match iu[a].cmp(&iv[b]) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                pairs.push((ru[a], rv[b]));
                a += 1;
                b += 1;
            }
        }
    }
    let union = iu.len() + iv.len() - pairs.len();
    (pairs, union)
}
