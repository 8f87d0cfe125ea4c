//! Measures of the form `sum_{i in I_u} sum_{j in I_v} k(r_ui, r_vj) s(i, j)`.
//!
//! Every pair of rated items contributes, so two users with no item in common
//! still get a score whenever their items are similar. The normalized variants
//! divide by `|I_u| |I_v|`.

use super::{MeasureResult, ScoreKind};
use crate::error::Result;
use crate::metric::{ItemMetric, SimilarityTable};
use crate::model::{ItemId, RatingScale, SparseRatings, UserId};

/// Item-to-item similarity consumed by the BCF family.
pub trait ItemSimilarity {
    fn item_similarity(&self, i: ItemId, j: ItemId) -> f64;
}

impl ItemSimilarity for SimilarityTable {
    fn item_similarity(&self, i: ItemId, j: ItemId) -> f64 {
        self.get(i, j)
    }
}

impl<T: ItemMetric + ?Sized> ItemSimilarity for T {
    fn item_similarity(&self, i: ItemId, j: ItemId) -> f64 {
        self.similarity(i, j)
    }
}

/// What a rating kernel may look at besides the two ratings.
#[derive(Clone, Copy, Debug)]
pub struct KernelContext {
    pub scale: RatingScale,
}

/// How much two ratings agree, in `[0, 1]`.
#[derive(Clone, Copy)]
pub struct RatingKernel {
    pub name: &'static str,
    pub eval: fn(f64, f64, &KernelContext) -> f64,
}

impl std::fmt::Debug for RatingKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("RatingKernel").field(&self.name).finish()
    }
}

fn agreement(a: f64, b: f64, ctx: &KernelContext) -> f64 {
    1.0 - (a - b).abs() / ctx.scale.range()
}

fn sigmoid_agreement(a: f64, b: f64, ctx: &KernelContext) -> f64 {
    // 1 for equal ratings, decaying smoothly with the normalized gap.
    let gap = (a - b).abs() / ctx.scale.range();
    2.0 / (1.0 + (4.0 * gap).exp())
}

impl RatingKernel {
    /// `1 - |a - b| / range`.
    pub const AGREEMENT: RatingKernel = RatingKernel {
        name: "agreement",
        eval: agreement,
    };

    /// `2 / (1 + exp(4 |a - b| / range))`.
    pub const SIGMOID_AGREEMENT: RatingKernel = RatingKernel {
        name: "sigmoid-agreement",
        eval: sigmoid_agreement,
    };

    pub fn eval(&self, a: f64, b: f64, ctx: &KernelContext) -> f64 {
        (self.eval)(a, b, ctx)
    }
}

/// Negative item similarities are treated as zero.
pub fn bcf_family_sim(
    u: UserId,
    v: UserId,
    ratings: &SparseRatings,
    item_sim: &(impl ItemSimilarity + ?Sized),
    kernel: RatingKernel,
    normalized: bool,
) -> Result<MeasureResult> {
    ratings.check_user(u)?;
    ratings.check_user(v)?;
    let (iu, ru) = (ratings.user_items(u), ratings.user_ratings(u));
    let (iv, rv) = (ratings.user_items(v), ratings.user_ratings(v));
    if iu.is_empty() || iv.is_empty() {
        return Ok(MeasureResult::uncomputable(ScoreKind::Similarity));
    }
    let ctx = KernelContext {
        scale: ratings.scale(),
    };
    let mut total = 0.0;
    for (&i, &a) in iu.iter().zip(ru) {
        for (&j, &b) in iv.iter().zip(rv) {
            let s = item_sim.item_similarity(i, j);
            if s > 0.0 {
                total += kernel.eval(a, b, &ctx) * s;
            }
        }
    }
    if normalized {
        total /= (iu.len() * iv.len()) as f64;
    }
    Ok(MeasureResult::similarity(total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_are_one_on_agreement() {
        let ctx = KernelContext {
            scale: RatingScale::FIVE_STAR,
        };
        for k in [RatingKernel::AGREEMENT, RatingKernel::SIGMOID_AGREEMENT] {
            assert_eq!(k.eval(3.0, 3.0, &ctx), 1.0);
            assert!(k.eval(1.0, 5.0, &ctx) < k.eval(2.0, 5.0, &ctx));
            assert!(k.eval(1.0, 5.0, &ctx) >= 0.0);
        }
        assert_eq!(RatingKernel::AGREEMENT.eval(1.0, 5.0, &ctx), 0.0);
    }

    #[test]
    fn disjoint_users_still_score() {
        let r = SparseRatings::from_triplets(
            2,
            2,
            RatingScale::FIVE_STAR,
            [(0, 0, 5.0), (1, 1, 4.0)],
        )
        .unwrap();
        let sim = SimilarityTable::new(2, vec![1.0, 0.6, 0.6, 1.0]).unwrap();
        let got = bcf_family_sim(0, 1, &r, &sim, RatingKernel::AGREEMENT, true).unwrap();
        assert!((got.value - 0.75 * 0.6).abs() < 1e-15);
    }
}
