//! Balanced optimal transport between two preferences.
//!
//! A [`TransportProblem`] pairs a supply distribution (rows), a demand
//! distribution (columns) and a row-major ground-cost matrix. Its optimum
//! over all couplings with those marginals is the preference distance.
//!
//! * [`solve_exact`]: transportation simplex, the production solver.
//! * [`solve_oracle`]: dense two-phase tableau simplex for small instances,
//!   kept independent of the exact solver so the two can check each other.
//! * [`solve_entropic`]: log-domain Sinkhorn with a feasibility rounding
//!   step; an approximation for large supports.

mod entropic;
mod oracle;
mod simplex;

use serde::{Deserialize, Serialize};

pub use entropic::{solve_entropic, solve_entropic_with, EntropicOptions};
pub use oracle::{solve_oracle, ORACLE_SUPPORT_LIMIT};
pub use simplex::{solve_exact, solve_exact_with, InitialBasis, PivotRule, SimplexOptions};

use crate::error::{Error, Result};
use crate::metric::ItemMetric;
use crate::model::{ItemId, Preference};

/// Accepted deviation of a marginal's total from one. Inputs inside the
/// tolerance are renormalized, inputs outside are rejected.
pub const BALANCE_TOLERANCE: f64 = 1e-9;

/// Tolerance on the marginals of a returned coupling.
pub const MARGINAL_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TransportProblem {
    rows: Vec<ItemId>,
    cols: Vec<ItemId>,
    supply: Vec<f64>,
    demand: Vec<f64>,
    cost: Vec<f64>,
}

impl TransportProblem {
    /// A problem over anonymous supports `0..supply.len()` and `0..demand.len()`.
    pub fn new(supply: Vec<f64>, demand: Vec<f64>, cost: Vec<f64>) -> Result<Self> {
        let rows = (0..supply.len() as ItemId).collect();
        let cols = (0..demand.len() as ItemId).collect();
        Self::with_labels(rows, cols, supply, demand, cost)
    }

    pub fn with_labels(
        rows: Vec<ItemId>,
        cols: Vec<ItemId>,
        supply: Vec<f64>,
        demand: Vec<f64>,
        cost: Vec<f64>,
    ) -> Result<Self> {
        if rows.len() != supply.len() {
            return Err(Error::DimensionMismatch(rows.len(), supply.len()));
        }
        if cols.len() != demand.len() {
            return Err(Error::DimensionMismatch(cols.len(), demand.len()));
        }
        if cost.len() != supply.len() * demand.len() {
            return Err(Error::DimensionMismatch(
                supply.len() * demand.len(),
                cost.len(),
            ));
        }
        let supply = balanced(supply, "supply")?;
        let demand = balanced(demand, "demand")?;
        let n = demand.len();
        if let Some(k) = cost.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidCost {
                row: k / n,
                col: k % n,
                value: cost[k],
            });
        }
        Ok(TransportProblem {
            rows,
            cols,
            supply,
            demand,
            cost,
        })
    }

    /// Restricts the item metric to the two supports.
    pub fn between(from: &Preference, to: &Preference, metric: &dyn ItemMetric) -> Result<Self> {
        let mut cost = Vec::with_capacity(from.len() * to.len());
        for &i in from.support() {
            for &j in to.support() {
                cost.push(metric.distance(i, j));
            }
        }
        Self::with_labels(
            from.support().to_vec(),
            to.support().to_vec(),
            from.mass().to_vec(),
            to.mass().to_vec(),
            cost,
        )
    }

    pub fn num_rows(&self) -> usize {
        self.supply.len()
    }

    pub fn num_cols(&self) -> usize {
        self.demand.len()
    }

    pub fn supply(&self) -> &[f64] {
        &self.supply
    }

    pub fn demand(&self) -> &[f64] {
        &self.demand
    }

    /// Row-major `rows x cols` ground costs.
    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn row_items(&self) -> &[ItemId] {
        &self.rows
    }

    pub fn col_items(&self) -> &[ItemId] {
        &self.cols
    }

    /// The same problem with supply and demand swapped and the cost transposed.
    pub fn transposed(&self) -> Self {
        let (m, n) = (self.num_rows(), self.num_cols());
        let mut cost = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                cost[j * m + i] = self.cost[i * n + j];
            }
        }
        TransportProblem {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            supply: self.demand.clone(),
            demand: self.supply.clone(),
            cost,
        }
    }

    /// `sum W(i,j) c(i,j)` for a row-major weight matrix.
    pub fn objective(&self, weights: &[f64]) -> f64 {
        weights.iter().zip(&self.cost).map(|(w, c)| w * c).sum()
    }

    pub(crate) fn coupling(&self, weights: Vec<f64>) -> Coupling {
        Coupling {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            weights,
        }
    }
}

fn balanced(mut mass: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if mass.is_empty() {
        return Err(Error::InfeasibleProblem(format!("{what} is empty")));
    }
    if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::InfeasibleProblem(format!(
            "{what} has a negative or non-finite mass"
        )));
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > BALANCE_TOLERANCE {
        return Err(Error::InfeasibleProblem(format!(
            "{what} sums to {total}, expected 1"
        )));
    }
    if total != 1.0 {
        mass.iter_mut().for_each(|m| *m /= total);
    }
    Ok(mass)
}

/// A joint distribution over `rows x cols` with prescribed marginals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub rows: Vec<ItemId>,
    pub cols: Vec<ItemId>,
    /// Row-major `rows.len() x cols.len()` weights.
    pub weights: Vec<f64>,
}

impl Coupling {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols.len() + col]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.weights
            .chunks(self.cols.len())
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let n = self.cols.len();
        let mut sums = vec![0.0; n];
        for (k, w) in self.weights.iter().enumerate() {
            sums[k % n] += w;
        }
        sums
    }

    /// Largest absolute deviation of either marginal from the targets.
    pub fn marginal_error(&self, supply: &[f64], demand: &[f64]) -> f64 {
        let rows = self.row_sums().into_iter().zip(supply).map(|(a, b)| (a - b).abs());
        let cols = self.col_sums().into_iter().zip(demand).map(|(a, b)| (a - b).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    /// Whether all weights lie in `[0, 1]` and both marginals match within `tol`.
    pub fn is_feasible(&self, supply: &[f64], demand: &[f64], tol: f64) -> bool {
        self.weights.iter().all(|w| (0.0..=1.0).contains(w))
            && self.marginal_error(supply, demand) <= tol
    }

    /// Nonzero flows as `(row item, col item, mass)`.
    pub fn flows(&self) -> impl Iterator<Item = (ItemId, ItemId, f64)> + '_ {
        let n = self.cols.len();
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(move |(k, w)| (self.rows[k / n], self.cols[k % n], *w))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Entropic,
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportSolution {
    pub optimal_cost: f64,
    pub coupling: Coupling,
    pub iterations: usize,
    pub solver: SolverKind,
}

/// Runtime choice of solver for preference distances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Solver {
    #[default]
    Exact,
    Entropic { epsilon: f64, max_iter: usize },
}

impl Solver {
    pub fn solve(&self, problem: &TransportProblem) -> Result<TransportSolution> {
        match *self {
            Solver::Exact => solve_exact(problem),
            Solver::Entropic { epsilon, max_iter } => solve_entropic(problem, epsilon, max_iter),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Solver::Exact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renormalizes_within_tolerance() {
        let p = TransportProblem::new(vec![0.5, 0.5 + 5e-10], vec![1.0], vec![0.0, 1.0]).unwrap();
        assert!((p.supply().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unbalanced_and_bad_costs() {
        assert!(matches!(
            TransportProblem::new(vec![0.5, 0.6], vec![1.0], vec![0.0, 1.0]),
            Err(Error::InfeasibleProblem(_))
        ));
        assert!(matches!(
            TransportProblem::new(vec![1.0], vec![0.5, 0.5], vec![0.0, f64::NAN]),
            Err(Error::InvalidCost { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            TransportProblem::new(vec![1.0], vec![1.0], vec![-0.1]),
            Err(Error::InvalidCost { .. })
        ));
    }

    #[test]
    fn transpose_swaps_roles() {
        let p = TransportProblem::new(vec![0.25, 0.75], vec![0.5, 0.5], vec![1.0, 2.0, 3.0, 4.0])
            .unwrap();
        let t = p.transposed();
        assert_eq!(t.cost(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(t.supply(), p.demand());
    }
}
