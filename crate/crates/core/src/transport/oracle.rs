//! Dense two-phase tableau simplex over the flattened coupling variables.
//!
//! Deliberately shares nothing with the transportation simplex: it sees the
//! problem only as `min c.x  s.t.  A x = b, x >= 0` with one equality per row
//! marginal and per column marginal (the last column constraint is implied
//! and dropped), and starts from an all-artificial basis.

use super::{SolverKind, TransportProblem, TransportSolution};
use crate::error::{Error, Result};

/// Largest `rows + cols` the oracle accepts.
pub const ORACLE_SUPPORT_LIMIT: usize = 12;

const EPS: f64 = 1e-12;

pub fn solve_oracle(problem: &TransportProblem) -> Result<TransportSolution> {
    let m = problem.num_rows();
    let n = problem.num_cols();
    if m + n > ORACLE_SUPPORT_LIMIT {
        return Err(Error::OracleLimitExceeded {
            limit: ORACLE_SUPPORT_LIMIT,
            got: m + n,
        });
    }
    let vars = m * n;
    let cons = m + n - 1;
    let width = vars + cons + 1;
    let rhs = width - 1;

    let mut tableau = vec![vec![0.0; width]; cons];
    for i in 0..m {
        for j in 0..n {
            tableau[i][i * n + j] = 1.0;
        }
        tableau[i][rhs] = problem.supply()[i];
    }
    for j in 0..n - 1 {
        let r = m + j;
        for i in 0..m {
            tableau[r][i * n + j] = 1.0;
        }
        tableau[r][rhs] = problem.demand()[j];
    }
    for (r, row) in tableau.iter_mut().enumerate() {
        row[vars + r] = 1.0;
    }
    let mut basis: Vec<usize> = (vars..vars + cons).collect();

    // Phase 1: minimize the sum of artificials.
    let mut objective = vec![0.0; width];
    for row in &tableau {
        for k in 0..vars {
            objective[k] -= row[k];
        }
        objective[rhs] -= row[rhs];
    }
    let mut pivots = run(&mut tableau, &mut basis, &mut objective, width - 1);

    // Drive zero-level artificials out of the basis where possible.
    for r in 0..cons {
        if basis[r] >= vars {
            if let Some(k) = (0..vars).find(|&k| tableau[r][k].abs() > 1e-9) {
                pivot(&mut tableau, &mut basis, &mut objective, r, k);
                pivots += 1;
            }
        }
    }

    // Phase 2 over structural columns only.
    let mut objective = vec![0.0; width];
    objective[..vars].copy_from_slice(problem.cost());
    for r in 0..cons {
        let b = basis[r];
        let cb = if b < vars { problem.cost()[b] } else { 0.0 };
        if cb != 0.0 {
            for k in 0..width {
                objective[k] -= cb * tableau[r][k];
            }
        }
    }
    pivots += run(&mut tableau, &mut basis, &mut objective, vars);

    let mut weights = vec![0.0; vars];
    for r in 0..cons {
        if basis[r] < vars {
            weights[basis[r]] = tableau[r][rhs].max(0.0);
        }
    }
    let optimal_cost = problem.objective(&weights).max(0.0);
    Ok(TransportSolution {
        optimal_cost,
        coupling: problem.coupling(weights),
        iterations: pivots,
        solver: SolverKind::Oracle,
    })
}

/// Bland's-rule simplex over the first `columns` columns.
fn run(
    tableau: &mut [Vec<f64>],
    basis: &mut [usize],
    objective: &mut [f64],
    columns: usize,
) -> usize {
    let rhs = objective.len() - 1;
    let mut pivots = 0;
    while let Some(enter) = (0..columns).find(|&k| objective[k] < -EPS) {
        let mut leave: Option<(usize, f64)> = None;
        for (r, row) in tableau.iter().enumerate() {
            if row[enter] > EPS {
                let ratio = row[rhs] / row[enter];
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - EPS
                            || ((ratio - lratio).abs() <= EPS && basis[r] < basis[lr])
                        {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        // Transportation polytopes are bounded, so a blocking row always exists.
        let Some((row, _)) = leave else { break };
        pivot(tableau, basis, objective, row, enter);
        pivots += 1;
    }
    pivots
}

fn pivot(
    tableau: &mut [Vec<f64>],
    basis: &mut [usize],
    objective: &mut [f64],
    row: usize,
    col: usize,
) {
    let p = tableau[row][col];
    for v in tableau[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = tableau[row].clone();
    for (r, other) in tableau.iter_mut().enumerate() {
        if r != row {
            let f = other[col];
            if f != 0.0 {
                for (v, pv) in other.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    let f = objective[col];
    if f != 0.0 {
        for (v, pv) in objective.iter_mut().zip(&pivot_row) {
            *v -= f * pv;
        }
    }
    basis[row] = col;
}
