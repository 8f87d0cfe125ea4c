//! Rating matrix and preference distributions.
//!
//! [`SparseRatings`] stores the user-item matrix twice: row-compressed by user
//! (used to build preferences and compare users) and column-compressed by
//! item (used to find the raters of an item during neighbor search). Both
//! views are sorted by id, so iteration order is deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense user index assigned at ingestion.
pub type UserId = u32;
/// Dense item index assigned at ingestion.
pub type ItemId = u32;

/// Tolerance for a preference's mass to sum to one.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Inclusive rating scale `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl RatingScale {
    /// The 1-5 star scale used by MovieLens.
    pub const FIVE_STAR: RatingScale = RatingScale { min: 1.0, max: 5.0 };

    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min < 0.0 || max <= min {
            return Err(Error::Config(format!(
                "rating scale [{min}, {max}] must satisfy 0 <= min < max"
            )));
        }
        Ok(RatingScale { min, max })
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    /// Scale median, the neutral reference rating.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, rating: f64) -> bool {
        rating >= self.min && rating <= self.max
    }

    pub fn clamp(&self, rating: f64) -> f64 {
        rating.clamp(self.min, self.max)
    }
}

/// Immutable sparse user-item rating matrix.
#[derive(Clone, Debug)]
pub struct SparseRatings {
    num_users: usize,
    num_items: usize,
    scale: RatingScale,
    user_offsets: Vec<usize>,
    user_items: Vec<ItemId>,
    user_values: Vec<f64>,
    item_offsets: Vec<usize>,
    item_users: Vec<UserId>,
    item_values: Vec<f64>,
    user_means: Vec<f64>,
    user_stds: Vec<f64>,
    item_means: Vec<f64>,
    global_mean: Option<f64>,
}

impl SparseRatings {
    /// Builds the matrix from `(user, item, rating)` triplets.
    ///
    /// A repeated `(user, item)` pair keeps the last rating and logs a warning.
    pub fn from_triplets<I>(
        num_users: usize,
        num_items: usize,
        scale: RatingScale,
        triplets: I,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (UserId, ItemId, f64)>,
    {
        let mut entries: Vec<(UserId, ItemId, f64, usize)> = Vec::new();
        for (seq, (user, item, rating)) in triplets.into_iter().enumerate() {
            if user as usize >= num_users {
                return Err(Error::NotFound {
                    what: "user",
                    id: user.to_string(),
                });
            }
            if item as usize >= num_items {
                return Err(Error::NotFound {
                    what: "item",
                    id: item.to_string(),
                });
            }
            check_rating(scale, user, item, rating)?;
            entries.push((user, item, rating, seq));
        }
        // Later sequence numbers win on duplicates.
        entries.sort_unstable_by_key(|&(u, i, _, seq)| (u, i, std::cmp::Reverse(seq)));
        let before = entries.len();
        entries.dedup_by_key(|e| (e.0, e.1));
        if entries.len() != before {
            log::warn!(
                "{} duplicate (user, item) ratings dropped, keeping the last occurrence",
                before - entries.len()
            );
        }
        Ok(Self::from_sorted(
            num_users,
            num_items,
            scale,
            entries.into_iter().map(|(u, i, r, _)| (u, i, r)),
        ))
    }

    /// Entries must be sorted by `(user, item)` without duplicates and already validated.
    fn from_sorted(
        num_users: usize,
        num_items: usize,
        scale: RatingScale,
        entries: impl Iterator<Item = (UserId, ItemId, f64)>,
    ) -> Self {
        let mut user_offsets = vec![0usize; num_users + 1];
        let mut user_items = Vec::new();
        let mut user_values = Vec::new();
        let mut item_counts = vec![0usize; num_items];
        for (u, i, r) in entries {
            user_offsets[u as usize + 1] += 1;
            user_items.push(i);
            user_values.push(r);
            item_counts[i as usize] += 1;
        }
        for u in 0..num_users {
            user_offsets[u + 1] += user_offsets[u];
        }

        let mut item_offsets = vec![0usize; num_items + 1];
        for i in 0..num_items {
            item_offsets[i + 1] = item_offsets[i] + item_counts[i];
        }
        let mut cursor = item_offsets[..num_items].to_vec();
        let mut item_users = vec![0 as UserId; user_items.len()];
        let mut item_values = vec![0.0; user_items.len()];
        for u in 0..num_users {
            for k in user_offsets[u]..user_offsets[u + 1] {
                let i = user_items[k] as usize;
                item_users[cursor[i]] = u as UserId;
                item_values[cursor[i]] = user_values[k];
                cursor[i] += 1;
            }
        }

        let mut user_means = vec![f64::NAN; num_users];
        let mut user_stds = vec![f64::NAN; num_users];
        for u in 0..num_users {
            let values = &user_values[user_offsets[u]..user_offsets[u + 1]];
            if let Some((mean, std)) = mean_std(values) {
                user_means[u] = mean;
                user_stds[u] = std;
            }
        }
        let item_means = (0..num_items)
            .map(|i| {
                mean_std(&item_values[item_offsets[i]..item_offsets[i + 1]])
                    .map_or(f64::NAN, |(m, _)| m)
            })
            .collect();
        let global_mean = mean_std(&user_values).map(|(m, _)| m);

        SparseRatings {
            num_users,
            num_items,
            scale,
            user_offsets,
            user_items,
            user_values,
            item_offsets,
            item_users,
            item_values,
            user_means,
            user_stds,
            item_means,
            global_mean,
        }
    }

    /// Keeps only the entries selected by `keep`, preserving dimensions and scale.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let kept: Vec<_> = self
            .entries()
            .enumerate()
            .filter(|(idx, _)| keep(*idx))
            .map(|(_, e)| e)
            .collect();
        Self::from_sorted(self.num_users, self.num_items, self.scale, kept.into_iter())
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_ratings(&self) -> usize {
        self.user_items.len()
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    /// Fraction of the matrix that is unobserved.
    pub fn sparsity(&self) -> f64 {
        let cells = (self.num_users * self.num_items) as f64;
        if cells == 0.0 {
            return 1.0;
        }
        1.0 - self.num_ratings() as f64 / cells
    }

    pub fn check_user(&self, user: UserId) -> Result<()> {
        if (user as usize) < self.num_users {
            Ok(())
        } else {
            Err(Error::NotFound {
                what: "user",
                id: user.to_string(),
            })
        }
    }

    pub fn check_item(&self, item: ItemId) -> Result<()> {
        if (item as usize) < self.num_items {
            Ok(())
        } else {
            Err(Error::NotFound {
                what: "item",
                id: item.to_string(),
            })
        }
    }

    /// Items rated by `user`, ascending. Panics on an out-of-range user.
    pub fn user_items(&self, user: UserId) -> &[ItemId] {
        let u = user as usize;
        &self.user_items[self.user_offsets[u]..self.user_offsets[u + 1]]
    }

    /// Ratings parallel to [`user_items`](Self::user_items).
    pub fn user_ratings(&self, user: UserId) -> &[f64] {
        let u = user as usize;
        &self.user_values[self.user_offsets[u]..self.user_offsets[u + 1]]
    }

    /// Users who rated `item`, ascending.
    pub fn item_raters(&self, item: ItemId) -> &[UserId] {
        let i = item as usize;
        &self.item_users[self.item_offsets[i]..self.item_offsets[i + 1]]
    }

    /// Ratings parallel to [`item_raters`](Self::item_raters).
    pub fn item_ratings(&self, item: ItemId) -> &[f64] {
        let i = item as usize;
        &self.item_values[self.item_offsets[i]..self.item_offsets[i + 1]]
    }

    pub fn rating(&self, user: UserId, item: ItemId) -> Option<f64> {
        if user as usize >= self.num_users {
            return None;
        }
        let items = self.user_items(user);
        items
            .binary_search(&item)
            .ok()
            .map(|k| self.user_ratings(user)[k])
    }

    pub fn user_mean(&self, user: UserId) -> Option<f64> {
        self.user_means.get(user as usize).copied().filter(|m| !m.is_nan())
    }

    /// Population standard deviation of the user's ratings.
    pub fn user_std(&self, user: UserId) -> Option<f64> {
        self.user_stds.get(user as usize).copied().filter(|s| !s.is_nan())
    }

    pub fn item_mean(&self, item: ItemId) -> Option<f64> {
        self.item_means.get(item as usize).copied().filter(|m| !m.is_nan())
    }

    pub fn global_mean(&self) -> Option<f64> {
        self.global_mean
    }

    /// All entries in `(user, item)` order.
    pub fn entries(&self) -> impl Iterator<Item = (UserId, ItemId, f64)> + '_ {
        (0..self.num_users).flat_map(move |u| {
            let u = u as UserId;
            self.user_items(u)
                .iter()
                .zip(self.user_ratings(u))
                .map(move |(&i, &r)| (u, i, r))
        })
    }
}

fn check_rating(scale: RatingScale, user: UserId, item: ItemId, rating: f64) -> Result<()> {
    let reason = if !rating.is_finite() {
        Some("not finite")
    } else if rating < 0.0 {
        Some("negative")
    } else if !scale.contains(rating) {
        Some("outside the rating scale")
    } else {
        None
    };
    match reason {
        Some(reason) => Err(Error::InvalidRating {
            user: user.to_string(),
            item: item.to_string(),
            value: rating,
            reason,
        }),
        None => Ok(()),
    }
}

fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// A user's preference: a probability distribution over the items they rated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preference {
    support: Vec<ItemId>,
    mass: Vec<f64>,
}

impl Preference {
    /// Validates simplex membership and support uniqueness.
    pub fn new(support: Vec<ItemId>, mass: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InfeasibleProblem("empty preference support".into()));
        }
        if support.len() != mass.len() {
            return Err(Error::DimensionMismatch(support.len(), mass.len()));
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InfeasibleProblem("duplicate item in preference support".into()));
        }
        if mass.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::InfeasibleProblem("preference mass outside [0, 1]".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InfeasibleProblem(format!(
                "preference mass sums to {total}, not 1"
            )));
        }
        Ok(Preference { support, mass })
    }

    pub fn support(&self) -> &[ItemId] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Keeps the `top` heaviest items (ties broken by item id) and renormalizes.
    /// Support order is preserved.
    pub fn truncate(&self, top: usize) -> Preference {
        if top == 0 || top >= self.len() {
            return self.clone();
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.mass[b]
                .total_cmp(&self.mass[a])
                .then(self.support[a].cmp(&self.support[b]))
        });
        let mut keep = order[..top].to_vec();
        keep.sort_unstable();
        let total: f64 = keep.iter().map(|&k| self.mass[k]).sum();
        if total <= 0.0 {
            return self.clone();
        }
        Preference {
            support: keep.iter().map(|&k| self.support[k]).collect(),
            mass: keep.iter().map(|&k| self.mass[k] / total).collect(),
        }
    }
}

/// Normalizes a user's ratings into a distribution over their rated items.
pub fn build_preference(ratings: &SparseRatings, user: UserId) -> Result<Preference> {
    ratings.check_user(user)?;
    let items = ratings.user_items(user);
    let values = ratings.user_ratings(user);
    let total: f64 = values.iter().sum();
    if items.is_empty() || total <= 0.0 {
        return Err(Error::DegenerateUser(user));
    }
    let mut mass: Vec<f64> = values.iter().map(|r| r / total).collect();
    // Fold the rounding residue into the heaviest entry so the sum is 1 to the last ulp.
    let residue = 1.0 - mass.iter().sum::<f64>();
    if residue != 0.0 {
        let heaviest = (0..mass.len())
            .max_by(|&a, &b| mass[a].total_cmp(&mass[b]))
            .unwrap_or(0);
        mass[heaviest] = (mass[heaviest] + residue).clamp(0.0, 1.0);
    }
    Ok(Preference {
        support: items.to_vec(),
        mass,
    })
}
