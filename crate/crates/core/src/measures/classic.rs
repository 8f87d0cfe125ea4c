//! Co-rated and rating-statistics measures.
//!
//! With `C` the co-rated items of `u` and `v`:
//!
//! | key | value |
//! |-----|-------|
//! | `cos` | `sum r_u r_v / (|r_u|_C |r_v|_C)` |
//! | `pcc` | Pearson correlation over `C`, means taken over `C` |
//! | `msd` | mean squared difference over `C` of ratings rescaled to `[0, 1]` |
//! | `jaccard` | `|C| / |I_u ∪ I_v|` |
//! | `urp` | `1 - 1 / (1 + exp(-|mu_u - mu_v| |sigma_u - sigma_v|))` |
//! | `jmsd` | `jaccard * (1 - msd)` |
//! | `nhsm` | `JPSS * urp`, `JPSS = sum_C PSS * |C| / (|I_u| |I_v|)` |

use super::{co_rated, MeasureResult, ScoreKind};
use crate::error::Result;
use crate::model::{SparseRatings, UserId};

fn check_pair(ratings: &SparseRatings, u: UserId, v: UserId) -> Result<()> {
    ratings.check_user(u)?;
    ratings.check_user(v)
}

pub fn cos_sim(u: UserId, v: UserId, ratings: &SparseRatings) -> Result<MeasureResult> {
    check_pair(ratings, u, v)?;
    let (common, _) = co_rated(ratings, u, v);
    let dot: f64 = common.iter().map(|(a, b)| a * b).sum();
    let nu = common.iter().map(|(a, _)| a * a).sum::<f64>().sqrt();
    let nv = common.iter().map(|(_, b)| b * b).sum::<f64>().sqrt();
    if common.is_empty() || nu == 0.0 || nv == 0.0 {
        return Ok(MeasureResult::uncomputable(ScoreKind::Similarity));
    }
    Ok(MeasureResult::similarity((dot / (nu * nv)).clamp(-1.0, 1.0)))
}

pub fn pcc_sim(u: UserId, v: UserId, ratings: &SparseRatings) -> Result<MeasureResult> {
    check_pair(ratings, u, v)?;
    let (common, _) = co_rated(ratings, u, v);
    if common.is_empty() {
        return Ok(MeasureResult::uncomputable(ScoreKind::Similarity));
    }
    let n = common.len() as f64;
    let mu = common.iter().map(|(a, _)| a).sum::<f64>() / n;
    let mv = common.iter().map(|(_, b)| b).sum::<f64>() / n;
    let (mut cov, mut vu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in &common {
        cov += (a - mu) * (b - mv);
        vu += (a - mu) * (a - mu);
        vv += (b - mv) * (b - mv);
    }
    if vu == 0.0 || vv == 0.0 {
        return Ok(MeasureResult::uncomputable(ScoreKind::Similarity));
    }
    Ok(MeasureResult::similarity(
        (cov / (vu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0),
    ))
}

fn mean_squared_difference(ratings: &SparseRatings, common: &[(f64, f64)]) -> f64 {
    let scale = ratings.scale();
    let sum: f64 = common
        .iter()
        .map(|(a, b)| {
            let d = (a - b) / scale.range();
            d * d
        })
        .sum();
    sum / common.len() as f64
}

pub fn msd_dist(u: UserId, v: UserId, ratings: &SparseRatings) -> Result<MeasureResult> {
    check_pair(ratings, u, v)?;
    let (common, _) = co_rated(ratings, u, v);
    if common.is_empty() {
        return Ok(MeasureResult::uncomputable(ScoreKind::Distance));
    }
    Ok(MeasureResult::distance(mean_squared_difference(ratings, &common)))
}

pub fn jaccard_sim(u: UserId, v: UserId, ratings: &SparseRatings) -> Result<MeasureResult> {
    check_pair(ratings, u, v)?;
    let (common, union) = co_rated(ratings, u, v);
    if union == 0 {
        return Ok(MeasureResult::similarity(0.0));
    }
    Ok(MeasureResult::similarity(common.len() as f64 / union as f64))
}

fn urp_value(ratings: &SparseRatings, u: UserId, v: UserId) -> Option<f64> {
    let (mu, mv) = (ratings.user_mean(u)?, ratings.user_mean(v)?);
    let (su, sv) = (ratings.user_std(u)?, ratings.user_std(v)?);
    let x = (mu - mv).abs() * (su - sv).abs();
    Some(1.0 - 1.0 / (1.0 + (-x).exp()))
}

pub fn urp_sim(u: UserId, v: UserId, ratings: &SparseRatings) -> Result<MeasureResult> {
    check_pair(ratings, u, v)?;
    Ok(match urp_value(ratings, u, v) {
        Some(x) => MeasureResult::similarity(x),
        // A user without ratings has no mean to compare.
        None => MeasureResult::uncomputable(ScoreKind::Similarity),
    })
}

pub fn jmsd_sim(u: UserId, v: UserId, ratings: &SparseRatings) -> Result<MeasureResult> {
    check_pair(ratings, u, v)?;
    let (common, union) = co_rated(ratings, u, v);
    if common.is_empty() {
        return Ok(MeasureResult::uncomputable(ScoreKind::Similarity));
    }
    let jaccard = common.len() as f64 / union as f64;
    Ok(MeasureResult::similarity(
        jaccard * (1.0 - mean_squared_difference(ratings, &common)),
    ))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn nhsm_sim(u: UserId, v: UserId, ratings: &SparseRatings) -> Result<MeasureResult> {
    check_pair(ratings, u, v)?;
    let median = ratings.scale().midpoint();
    let items_u = ratings.user_items(u);
    let items_v = ratings.user_items(v);
    let mut pss = 0.0;
    let mut common = 0usize;
    let (mut a, mut b) = (0, 0);
    while a < items_u.len() && b < items_v.len() {
        match items_u[a].cmp(&items_v[b]) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                let item = items_u[a];
                let (r1, r2) = (ratings.user_ratings(u)[a], ratings.user_ratings(v)[b]);
                let item_mean = ratings.item_mean(item).unwrap_or(median);
                let proximity = 1.0 - sigmoid((r1 - r2).abs());
                let significance = sigmoid((r1 - median).abs() * (r2 - median).abs());
                let singularity = 1.0 - sigmoid((0.5 * (r1 + r2) - item_mean).abs());
                pss += proximity * significance * singularity;
                common += 1;
                a += 1;
                b += 1;
            }
        }
    }
    let Some(urp) = urp_value(ratings, u, v) else {
        return Ok(MeasureResult::uncomputable(ScoreKind::Similarity));
    };
    if common == 0 {
        return Ok(MeasureResult::uncomputable(ScoreKind::Similarity));
    }
    let jaccard = common as f64 / (items_u.len() * items_v.len()) as f64;
    Ok(MeasureResult::similarity(pss * jaccard * urp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RatingScale;

    fn ratings(t: &[(u32, u32, f64)]) -> SparseRatings {
        SparseRatings::from_triplets(4, 6, RatingScale::FIVE_STAR, t.iter().copied()).unwrap()
    }

    #[test]
    fn pcc_needs_variance() {
        let r = ratings(&[(0, 0, 3.0), (0, 1, 3.0), (1, 0, 2.0), (1, 1, 5.0)]);
        assert!(!pcc_sim(0, 1, &r).unwrap().computable);
        let r = ratings(&[(0, 0, 1.0), (0, 1, 5.0), (1, 0, 5.0), (1, 1, 1.0)]);
        assert!((pcc_sim(0, 1, &r).unwrap().value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn msd_is_rescaled() {
        let r = ratings(&[(0, 0, 1.0), (1, 0, 5.0), (0, 1, 3.0), (1, 1, 3.0)]);
        // ((4/4)^2 + 0) / 2
        assert!((msd_dist(0, 1, &r).unwrap().value - 0.5).abs() < 1e-15);
        assert!((jmsd_sim(0, 1, &r).unwrap().value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn urp_penalizes_spread_differences() {
        let r = ratings(&[(0, 0, 1.0), (0, 1, 5.0), (1, 2, 5.0), (1, 3, 5.0)]);
        // mu 3 vs 5, sigma 2 vs 0: x = 4
        let want = 1.0 - 1.0 / (1.0 + (-4.0f64).exp());
        assert!((urp_sim(0, 1, &r).unwrap().value - want).abs() < 1e-15);
        assert!(!urp_sim(0, 2, &r).unwrap().computable);
    }

    #[test]
    fn nhsm_hand_computed() {
        // One co-rated item (item 0) rated 4 by both; its item mean is 4.
        let r = ratings(&[(0, 0, 4.0), (1, 0, 4.0), (1, 1, 2.0)]);
        let proximity = 0.5;
        let significance = 1.0 / (1.0 + (-1.0f64).exp());
        let singularity = 0.5;
        let jaccard = 1.0 / 2.0;
        // mu 4 vs 3, sigma 0 vs 1
        let urp = 1.0 - 1.0 / (1.0 + (-1.0f64).exp());
        let want = proximity * significance * singularity * jaccard * urp;
        assert!((nhsm_sim(0, 1, &r).unwrap().value - want).abs() < 1e-15);
    }

    #[test]
    fn unknown_user() {
        let r = ratings(&[(0, 0, 4.0)]);
        assert!(cos_sim(0, 7, &r).is_err());
    }
}
