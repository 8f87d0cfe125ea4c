//! K-nearest-neighbor rating prediction with mean centering.
//!
//! ```
//! use pmd::model::{RatingScale, SparseRatings};
//! use pmd::recommender::{predict, Fallback, Neighbor, NeighborList};
//!
//! let train = SparseRatings::from_triplets(
//!     2,
//!     2,
//!     RatingScale::FIVE_STAR,
//!     [(0, 0, 3.0), (1, 0, 3.0), (1, 1, 4.0)],
//! )
//! .unwrap();
//! let neighbors = NeighborList::new(0, 40, vec![Neighbor { user: 1, weight: 1.0 }]);
//! let p = predict(0, 1, &neighbors, &train);
//! assert_eq!(p.fallback, Fallback::None);
//! assert!((p.value - 3.5).abs() < 1e-12);
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Measure, MeasureContext, MeasureResult, ScoreKind};
use crate::model::{ItemId, SparseRatings, UserId};

/// `1 - d / d_max`.
pub fn distance_to_weight(d: f64, d_max: f64) -> Result<f64> {
    if !(d_max > 0.0 && d_max.is_finite()) || !(0.0..=d_max).contains(&d) {
        return Err(Error::InvalidDistance { distance: d, d_max });
    }
    Ok(1.0 - d / d_max)
}

/// Neighbor weight for a score, or `None` when the pair cannot be used.
///
/// Distances are clipped to `d_max` before conversion. Negative similarities
/// are dropped, as is anything whose weight is not positive.
pub fn score_to_weight(score: &MeasureResult, d_max: f64) -> Option<f64> {
    let value = score.value()?;
    let w = match score.kind {
        ScoreKind::Similarity => value,
        ScoreKind::Distance => distance_to_weight(value.min(d_max), d_max).ok()?,
    };
    (w > 0.0).then_some(w)
}

/// Source of neighbor weights for user pairs.
pub trait PairWeights: Sync {
    fn weight(&self, u: UserId, v: UserId) -> Result<Option<f64>>;
}

/// Scores pairs on demand with a registered measure.
pub struct MeasureWeights<'a> {
    measure: Measure,
    ctx: MeasureContext<'a>,
    d_max: f64,
}

impl<'a> MeasureWeights<'a> {
    pub fn new(measure: Measure, ctx: MeasureContext<'a>) -> Self {
        let d_max = measure.distance_bound(&ctx);
        MeasureWeights { measure, ctx, d_max }
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }
}

impl PairWeights for MeasureWeights<'_> {
    fn weight(&self, u: UserId, v: UserId) -> Result<Option<f64>> {
        let score = self.measure.score(&self.ctx, u, v)?;
        Ok(score_to_weight(&score, self.d_max))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub user: UserId,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub target: UserId,
    pub k: usize,
    entries: Vec<Neighbor>,
}

impl NeighborList {
    /// Sorts by weight (descending, ties by user id) and keeps the top `k`
    /// entries with positive weight.
    pub fn new(target: UserId, k: usize, mut entries: Vec<Neighbor>) -> Self {
        entries.retain(|n| n.weight > 0.0 && n.weight.is_finite());
        entries.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.user.cmp(&b.user)));
        entries.truncate(k);
        NeighborList { target, k, entries }
    }

    pub fn entries(&self) -> &[Neighbor] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The `k` users who rated `item` and carry the largest weights to `target`.
pub fn top_k_neighbors(
    target: UserId,
    item: ItemId,
    k: usize,
    ratings: &SparseRatings,
    weights: &(impl PairWeights + ?Sized),
) -> Result<NeighborList> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    ratings.check_user(target)?;
    ratings.check_item(item)?;
    let mut candidates = Vec::new();
    for &v in ratings.item_raters(item) {
        if v == target {
            continue;
        }
        if let Some(weight) = weights.weight(target, v)? {
            candidates.push(Neighbor { user: v, weight });
        }
    }
    Ok(NeighborList::new(target, k, candidates))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    None,
    UserMean,
    GlobalMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub user: UserId,
    pub item: ItemId,
    pub value: f64,
    pub fallback: Fallback,
}

/// `r_u + sum w (r_vi - r_v) / sum |w|`, clamped to the rating scale.
///
/// Falls back to the target's mean when no neighbor has rated the item, and
/// to the global mean when the target has no ratings at all.
pub fn predict(
    target: UserId,
    item: ItemId,
    neighbors: &NeighborList,
    ratings: &SparseRatings,
) -> Prediction {
    let scale = ratings.scale();
    let make = |value: f64, fallback| Prediction {
        user: target,
        item,
        value: scale.clamp(value),
        fallback,
    };
    let Some(user_mean) = ratings.user_mean(target) else {
        let global = ratings.global_mean().unwrap_or(scale.midpoint());
        return make(global, Fallback::GlobalMean);
    };
    let (mut num, mut den) = (0.0, 0.0);
    for n in neighbors.entries() {
        let (Some(r), Some(mean)) = (ratings.rating(n.user, item), ratings.user_mean(n.user)) else {
            continue;
        };
        num += n.weight * (r - mean);
        den += n.weight.abs();
    }
    if den > 0.0 {
        make(user_mean + num / den, Fallback::None)
    } else {
        make(user_mean, Fallback::UserMean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RatingScale;

    struct Fixed(Vec<(UserId, UserId, f64)>);

    impl PairWeights for Fixed {
        fn weight(&self, u: UserId, v: UserId) -> Result<Option<f64>> {
            Ok(self
                .0
                .iter()
                .find(|&&(a, b, _)| a == u && b == v)
                .map(|&(_, _, w)| w))
        }
    }

    fn toy() -> SparseRatings {
        SparseRatings::from_triplets(
            5,
            3,
            RatingScale::FIVE_STAR,
            [
                (0, 0, 4.0),
                (0, 1, 2.0),
                (1, 2, 5.0),
                (1, 1, 3.0),
                (2, 2, 2.0),
                (2, 1, 4.0),
                (3, 2, 4.0),
                (3, 0, 4.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn weight_transform() {
        assert_eq!(distance_to_weight(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(distance_to_weight(2.0, 2.0).unwrap(), 0.0);
        let w = distance_to_weight(0.6435, std::f64::consts::PI).unwrap();
        assert!((w - 0.7951685).abs() < 1e-6);
        assert!(distance_to_weight(1.5, 1.0).is_err());
        assert!(distance_to_weight(-0.1, 1.0).is_err());
        assert!(distance_to_weight(0.0, 0.0).is_err());
    }

    #[test]
    fn top_k_orders_and_truncates() {
        let r = toy();
        let w = Fixed(vec![(0, 1, 0.5), (0, 2, 0.1), (0, 3, 0.9)]);
        let list = top_k_neighbors(0, 2, 2, &r, &w).unwrap();
        let users: Vec<_> = list.entries().iter().map(|n| n.user).collect();
        assert_eq!(users, vec![3, 1]);
        let all = top_k_neighbors(0, 2, 10, &r, &w).unwrap();
        assert_eq!(all.len(), 3);
        // Only user 3 rated item 0, and it has no usable weight here.
        let w = Fixed(vec![(0, 1, 0.5)]);
        assert!(top_k_neighbors(0, 0, 5, &r, &w).unwrap().is_empty());
    }

    #[test]
    fn ties_break_by_user_id() {
        let list = NeighborList::new(
            0,
            3,
            vec![
                Neighbor { user: 9, weight: 0.5 },
                Neighbor { user: 2, weight: 0.5 },
                Neighbor { user: 4, weight: 0.0 },
            ],
        );
        let users: Vec<_> = list.entries().iter().map(|n| n.user).collect();
        assert_eq!(users, vec![2, 9]);
    }

    #[test]
    fn fallbacks() {
        let r = toy();
        let empty = NeighborList::new(0, 40, vec![]);
        let p = predict(0, 2, &empty, &r);
        assert_eq!(p.fallback, Fallback::UserMean);
        assert_eq!(p.value, 3.0);
        let p = predict(4, 2, &empty, &r);
        assert_eq!(p.fallback, Fallback::GlobalMean);
        assert_eq!(p.value, 3.5);
    }

    #[test]
    fn symmetric_deviations_cancel() {
        let r = toy();
        // Users 1 and 2 both have mean 4 and 3; deviations on item 2 are +1 and -1.
        let list = NeighborList::new(
            0,
            40,
            vec![
                Neighbor { user: 1, weight: 0.5 },
                Neighbor { user: 2, weight: 0.5 },
            ],
        );
        let p = predict(0, 2, &list, &r);
        assert_eq!(p.fallback, Fallback::None);
        assert!((p.value - 3.0).abs() < 1e-12);
    }
}
