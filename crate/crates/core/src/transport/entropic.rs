//! Entropy-regularized transport (log-domain Sinkhorn).
//!
//! The regularization is annealed from the cost scale down to the target
//! epsilon. The final scaled plan is rounded onto the feasible set, so the
//! reported cost is that of a true coupling and upper-bounds the exact optimum.

use super::{SolverKind, TransportProblem, TransportSolution};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropicOptions {
    /// L1 row-marginal error at which the final stage stops.
    pub tolerance: f64,
    /// Factor applied to epsilon between annealing stages.
    pub anneal: f64,
}

impl Default for EntropicOptions {
    fn default() -> Self {
        EntropicOptions {
            tolerance: 1e-9,
            anneal: 0.5,
        }
    }
}

pub fn solve_entropic(
    problem: &TransportProblem,
    epsilon: f64,
    max_iter: usize,
) -> Result<TransportSolution> {
    solve_entropic_with(problem, epsilon, max_iter, EntropicOptions::default())
}

pub fn solve_entropic_with(
    problem: &TransportProblem,
    epsilon: f64,
    max_iter: usize,
    options: EntropicOptions,
) -> Result<TransportSolution> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let n = problem.num_cols();
    let rows: Vec<usize> = (0..problem.num_rows())
        .filter(|&i| problem.supply()[i] > 0.0)
        .collect();
    let cols: Vec<usize> = (0..n).filter(|&j| problem.demand()[j] > 0.0).collect();
    let a: Vec<f64> = rows.iter().map(|&i| problem.supply()[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| problem.demand()[j]).collect();
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let cost: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| problem.cost()[i * n + j]))
        .collect();
    let (p, q) = (rows.len(), cols.len());

    let mut f = vec![0.0; p];
    let mut g = vec![0.0; q];
    let scale = cost.iter().copied().fold(0.0, f64::max).max(epsilon);
    let mut eps = scale;
    let mut iterations = 0usize;
    let mut error = f64::INFINITY;
    let mut scratch = vec![0.0; p.max(q)];
    loop {
        let last_stage = eps <= epsilon;
        let stage_tol = if last_stage {
            options.tolerance
        } else {
            options.tolerance.max(1e-4)
        };
        loop {
            if iterations >= max_iter {
                return Err(Error::ConvergenceFailure {
                    iterations,
                    marginal_error: error,
                });
            }
            iterations += 1;
            for i in 0..p {
                for j in 0..q {
                    scratch[j] = (g[j] - cost[i * q + j]) / eps;
                }
                f[i] = eps * (log_a[i] - log_sum_exp(&scratch[..q]));
            }
            for j in 0..q {
                for i in 0..p {
                    scratch[i] = (f[i] - cost[i * q + j]) / eps;
                }
                g[j] = eps * (log_b[j] - log_sum_exp(&scratch[..p]));
            }
            // Columns are exact after the g update; measure the rows.
            error = (0..p)
                .map(|i| {
                    let row: f64 = (0..q)
                        .map(|j| ((f[i] + g[j] - cost[i * q + j]) / eps).exp())
                        .sum();
                    (row - a[i]).abs()
                })
                .sum();
            if error.is_nan() {
                return Err(Error::ConvergenceFailure {
                    iterations,
                    marginal_error: error,
                });
            }
            if error <= stage_tol {
                break;
            }
        }
        if last_stage {
            break;
        }
        eps = (eps * options.anneal).max(epsilon);
    }

    let mut plan = vec![0.0; p * q];
    for i in 0..p {
        for j in 0..q {
            plan[i * q + j] = ((f[i] + g[j] - cost[i * q + j]) / eps).exp();
        }
    }
    round_to_feasible(&mut plan, &a, &b);

    let mut weights = vec![0.0; problem.num_rows() * n];
    for (pi, &i) in rows.iter().enumerate() {
        for (qj, &j) in cols.iter().enumerate() {
            weights[i * n + j] = plan[pi * q + qj];
        }
    }
    let optimal_cost = problem.objective(&weights);
    Ok(TransportSolution {
        optimal_cost,
        coupling: problem.coupling(weights),
        iterations,
        solver: SolverKind::Entropic,
    })
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Projects a positive plan onto the coupling polytope: shrink rows and
/// columns that carry too much mass, then spread the deficit as a rank-one update.
fn round_to_feasible(plan: &mut [f64], a: &[f64], b: &[f64]) {
    let (p, q) = (a.len(), b.len());
    for i in 0..p {
        let row: f64 = plan[i * q..(i + 1) * q].iter().sum();
        if row > a[i] {
            let s = a[i] / row;
            plan[i * q..(i + 1) * q].iter_mut().for_each(|x| *x *= s);
        }
    }
    for j in 0..q {
        let col: f64 = (0..p).map(|i| plan[i * q + j]).sum();
        if col > b[j] {
            let s = b[j] / col;
            (0..p).for_each(|i| plan[i * q + j] *= s);
        }
    }
    let row_deficit: Vec<f64> = (0..p)
        .map(|i| (a[i] - plan[i * q..(i + 1) * q].iter().sum::<f64>()).max(0.0))
        .collect();
    let col_deficit: Vec<f64> = (0..q)
        .map(|j| (b[j] - (0..p).map(|i| plan[i * q + j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = row_deficit.iter().sum();
    if total > 0.0 {
        for i in 0..p {
            for j in 0..q {
                plan[i * q + j] += row_deficit[i] * col_deficit[j] / total;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_is_exact() {
        let p = TransportProblem::new(vec![1.0], vec![1.0], vec![0.4]).unwrap();
        for eps in [1.0, 1e-2, 1e-4] {
            let s = solve_entropic(&p, eps, 1000).unwrap();
            assert!((s.optimal_cost - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_epsilon() {
        let p = TransportProblem::new(vec![1.0], vec![1.0], vec![0.4]).unwrap();
        assert!(solve_entropic(&p, 0.0, 10).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let p = TransportProblem::new(
            vec![0.3, 0.7],
            vec![0.6, 0.4],
            vec![0.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        match solve_entropic(&p, 1e-3, 2) {
            Err(Error::ConvergenceFailure {
                iterations,
                marginal_error,
            }) => {
                assert_eq!(iterations, 2);
                assert!(marginal_error > 0.0);
            }
            other => panic!("expected ConvergenceFailure, got {other:?}"),
        }
    }

    #[test]
    fn zero_mass_rows_are_skipped() {
        let p = TransportProblem::new(
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![5.0, 5.0, 0.0, 1.0],
        )
        .unwrap();
        let s = solve_entropic(&p, 1e-3, 100_000).unwrap();
        assert_eq!(s.coupling.get(0, 0), 0.0);
        assert!((s.optimal_cost - 0.5).abs() < 1e-9);
    }
}
