//! Transportation simplex.
//!
//! A basis is a spanning tree over the `m + n` row and column nodes with
//! `m + n - 1` basic cells (degenerate zero flows allowed). Each pivot prices
//! the non-basic cells against the tree's node potentials, routes flow
//! around the cycle closed by the entering cell, and drops the blocking cell.

use super::{SolverKind, TransportProblem, TransportSolution};
use crate::error::Result;

/// Starting basis construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialBasis {
    NorthWest,
    /// Greedy allocation in increasing cost order.
    #[default]
    MinimumCost,
}

/// Entering-cell selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PivotRule {
    /// Lowest-index improving cell; lowest-index blocking cell leaves.
    Bland,
    /// Most negative reduced cost within a rotating block of cells. Falls
    /// back to Bland's rule for good after a long run of degenerate pivots.
    #[default]
    BlockSearch,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimplexOptions {
    pub initial: InitialBasis,
    pub pivot: PivotRule,
}

pub fn solve_exact(problem: &TransportProblem) -> Result<TransportSolution> {
    solve_exact_with(problem, SimplexOptions::default())
}

pub fn solve_exact_with(
    problem: &TransportProblem,
    options: SimplexOptions,
) -> Result<TransportSolution> {
    let m = problem.num_rows();
    let n = problem.num_cols();
    let cost = problem.cost();
    let cells = match options.initial {
        InitialBasis::NorthWest => north_west(problem.supply(), problem.demand()),
        InitialBasis::MinimumCost => minimum_cost(problem.supply(), problem.demand(), cost),
    };
    let mut tree = Tree::new(m, n, cost, cells);
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let tol = 1e-11 * max_cost.max(1.0);

    let mut rule = options.pivot;
    let mut cursor = 0usize;
    let block = ((m * n) as f64).sqrt().ceil().max(16.0) as usize;
    let mut degenerate_run = 0usize;
    let mut iterations = 0usize;
    loop {
        let entering = match rule {
            PivotRule::Bland => tree.price_bland(tol),
            PivotRule::BlockSearch => tree.price_block(tol, block, &mut cursor),
        };
        let Some(cell) = entering else { break };
        iterations += 1;
        let theta = tree.pivot(cell);
        if theta == 0.0 {
            degenerate_run += 1;
            if degenerate_run > m + n {
                rule = PivotRule::Bland;
            }
        } else {
            degenerate_run = 0;
        }
    }

    let mut weights = vec![0.0; m * n];
    for (slot, &(i, j)) in tree.cells.iter().enumerate() {
        weights[i as usize * n + j as usize] += tree.flow[slot];
    }
    let optimal_cost = problem.objective(&weights).max(0.0);
    Ok(TransportSolution {
        optimal_cost,
        coupling: problem.coupling(weights),
        iterations,
        solver: SolverKind::Exact,
    })
}

type Cell = (u32, u32, f64);

fn north_west(supply: &[f64], demand: &[f64]) -> Vec<Cell> {
    let (m, n) = (supply.len(), demand.len());
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut cells = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        if i == m - 1 && j == n - 1 {
            cells.push((i as u32, j as u32, s[i]));
            break;
        }
        let advance_row = if i == m - 1 {
            false
        } else if j == n - 1 {
            true
        } else {
            s[i] <= d[j]
        };
        if advance_row {
            let x = s[i];
            cells.push((i as u32, j as u32, x));
            d[j] = (d[j] - x).max(0.0);
            i += 1;
        } else {
            let x = d[j];
            cells.push((i as u32, j as u32, x));
            s[i] = (s[i] - x).max(0.0);
            j += 1;
        }
    }
    cells
}

fn minimum_cost(supply: &[f64], demand: &[f64], cost: &[f64]) -> Vec<Cell> {
    let (m, n) = (supply.len(), demand.len());
    // Costs are nonnegative, so their bit patterns sort like the values.
    let mut keys: Vec<(u64, u32)> = cost
        .iter()
        .enumerate()
        .map(|(k, c)| (c.to_bits(), k as u32))
        .collect();
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut row_alive = vec![true; m];
    let mut col_alive = vec![true; n];
    let (mut rows_left, mut cols_left) = (m, n);
    let mut cells = Vec::with_capacity(m + n - 1);
    // Allocation rarely reaches far into the cost order: sort it chunk by chunk.
    let mut start = 0;
    let mut chunk = 4 * (m + n);
    'fill: while start < keys.len() {
        let end = (start + chunk).min(keys.len());
        if end < keys.len() {
            keys[start..].select_nth_unstable(end - start - 1);
        }
        keys[start..end].sort_unstable();
        for &(_, k) in &keys[start..end] {
            let (i, j) = (k as usize / n, k as usize % n);
            if !row_alive[i] || !col_alive[j] {
                continue;
            }
            if rows_left == 1 && cols_left == 1 {
                cells.push((i as u32, j as u32, s[i]));
                break 'fill;
            }
            let close_row = if rows_left == 1 {
                false
            } else if cols_left == 1 {
                true
            } else {
                s[i] <= d[j]
            };
            if close_row {
                let x = s[i];
                cells.push((i as u32, j as u32, x));
                d[j] = (d[j] - x).max(0.0);
                row_alive[i] = false;
                rows_left -= 1;
            } else {
                let x = d[j];
                cells.push((i as u32, j as u32, x));
                s[i] = (s[i] - x).max(0.0);
                col_alive[j] = false;
                cols_left -= 1;
            }
        }
        start = end;
        chunk *= 2;
    }
    debug_assert_eq!(cells.len(), m + n - 1);
    cells
}

const NONE: u32 = u32::MAX;

/// Spanning-tree basis. Nodes `0..m` are rows, `m..m + n` are columns.
struct Tree<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    cells: Vec<(u32, u32)>,
    flow: Vec<f64>,
    adjacency: Vec<Vec<u32>>,
    parent: Vec<u32>,
    parent_slot: Vec<u32>,
    depth: Vec<u32>,
    potential: Vec<f64>,
    queue: Vec<u32>,
    down: Vec<u32>,
    up: Vec<u32>,
}

impl<'a> Tree<'a> {
    fn new(m: usize, n: usize, cost: &'a [f64], initial: Vec<Cell>) -> Self {
        let nodes = m + n;
        let mut tree = Tree {
            m,
            n,
            cost,
            cells: Vec::with_capacity(initial.len()),
            flow: Vec::with_capacity(initial.len()),
            adjacency: vec![Vec::new(); nodes],
            parent: vec![NONE; nodes],
            parent_slot: vec![NONE; nodes],
            depth: vec![0; nodes],
            potential: vec![0.0; nodes],
            queue: Vec::with_capacity(nodes),
            down: Vec::new(),
            up: Vec::new(),
        };
        for (slot, (i, j, x)) in initial.into_iter().enumerate() {
            tree.cells.push((i, j));
            tree.flow.push(x);
            tree.adjacency[i as usize].push(slot as u32);
            tree.adjacency[m + j as usize].push(slot as u32);
        }
        tree.rebuild();
        tree
    }

    /// Recomputes parents, depths and potentials by breadth-first search from row 0.
    fn rebuild(&mut self) {
        let m = self.m;
        self.depth.fill(NONE);
        self.queue.clear();
        self.queue.push(0);
        self.depth[0] = 0;
        self.parent[0] = NONE;
        self.parent_slot[0] = NONE;
        self.potential[0] = 0.0;
        let mut head = 0;
        while head < self.queue.len() {
            let node = self.queue[head] as usize;
            head += 1;
            for &slot in &self.adjacency[node] {
                let (i, j) = self.cells[slot as usize];
                let c = self.cost[i as usize * self.n + j as usize];
                let other = if node < m { m + j as usize } else { i as usize };
                if self.depth[other] != NONE {
                    continue;
                }
                self.depth[other] = self.depth[node] + 1;
                self.parent[other] = node as u32;
                self.parent_slot[other] = slot;
                // u_i + v_j = c_ij on basic cells.
                self.potential[other] = c - self.potential[node];
                self.queue.push(other as u32);
            }
        }
        debug_assert_eq!(self.queue.len(), m + self.n, "basis is not spanning");
    }

    fn price_bland(&self, tol: f64) -> Option<usize> {
        let (m, n) = (self.m, self.n);
        let (rows, cols) = self.potential.split_at(m);
        for i in 0..m {
            let row = &self.cost[i * n..(i + 1) * n];
            let u = rows[i];
            if let Some(j) = (0..n).find(|&j| row[j] - u - cols[j] < -tol) {
                return Some(i * n + j);
            }
        }
        None
    }

    fn price_block(&self, tol: f64, block: usize, cursor: &mut usize) -> Option<usize> {
        let (m, n) = (self.m, self.n);
        let (rows, cols) = self.potential.split_at(m);
        let total = m * n;
        let mut best = None;
        let mut best_value = -tol;
        let mut in_block = 0;
        let (mut i, mut j) = (*cursor / n, *cursor % n);
        let mut u = rows[i];
        let mut row = &self.cost[i * n..(i + 1) * n];
        for _ in 0..total {
            let rc = row[j] - u - cols[j];
            if rc < best_value {
                best_value = rc;
                best = Some(i * n + j);
            }
            j += 1;
            if j == n {
                j = 0;
                i = if i + 1 == m { 0 } else { i + 1 };
                u = rows[i];
                row = &self.cost[i * n..(i + 1) * n];
            }
            in_block += 1;
            if in_block == block {
                if best.is_some() {
                    break;
                }
                in_block = 0;
            }
        }
        *cursor = i * n + j;
        best
    }

    /// Brings cell `k` into the basis and returns the flow moved around the cycle.
    fn pivot(&mut self, k: usize) -> f64 {
        let (i, j) = (k / self.n, k % self.n);
        let mut a = i;
        let mut b = self.m + j;
        self.down.clear();
        self.up.clear();
        while self.depth[a] > self.depth[b] {
            self.down.push(self.parent_slot[a]);
            a = self.parent[a] as usize;
        }
        while self.depth[b] > self.depth[a] {
            self.up.push(self.parent_slot[b]);
            b = self.parent[b] as usize;
        }
        while a != b {
            self.down.push(self.parent_slot[a]);
            a = self.parent[a] as usize;
            self.up.push(self.parent_slot[b]);
            b = self.parent[b] as usize;
        }

        // On the cycle, the edge at even distance from either end point of the
        // entering cell loses flow and the edge at odd distance gains it.
        let mut theta = f64::INFINITY;
        let mut leaving = NONE;
        let mut leaving_key = usize::MAX;
        for side in [&self.down, &self.up] {
            for &slot in side.iter().step_by(2) {
                let f = self.flow[slot as usize];
                let (r, c) = self.cells[slot as usize];
                let key = r as usize * self.n + c as usize;
                if f < theta || (f == theta && key < leaving_key) {
                    theta = f;
                    leaving = slot;
                    leaving_key = key;
                }
            }
        }
        for side in [&self.down, &self.up] {
            for (t, &slot) in side.iter().enumerate() {
                let f = &mut self.flow[slot as usize];
                if t % 2 == 0 {
                    *f = (*f - theta).max(0.0);
                } else {
                    *f += theta;
                }
            }
        }

        let slot = leaving as usize;
        let (old_i, old_j) = self.cells[slot];
        let (old_row, old_col) = (old_i as usize, self.m + old_j as usize);
        // The endpoint whose parent edge is leaving roots the subtree that gets re-hung.
        let child = if self.parent_slot[old_row] == leaving {
            old_row
        } else {
            old_col
        };
        detach(&mut self.adjacency[old_row], leaving);
        detach(&mut self.adjacency[old_col], leaving);
        self.cells[slot] = (i as u32, j as u32);
        self.flow[slot] = theta;
        self.adjacency[i].push(leaving);
        self.adjacency[self.m + j].push(leaving);
        let (inner, outer) = if self.in_subtree(i, child) {
            (i, self.m + j)
        } else {
            (self.m + j, i)
        };
        self.rehang(inner, outer, leaving);
        theta
    }

    fn in_subtree(&self, mut node: usize, root: usize) -> bool {
        while self.depth[node] > self.depth[root] {
            node = self.parent[node] as usize;
        }
        node == root
    }

    /// Re-roots the detached subtree containing `inner` below `outer` through
    /// the basic cell `slot`, refreshing parents, depths and potentials.
    fn rehang(&mut self, inner: usize, outer: usize, slot: u32) {
        let m = self.m;
        self.parent[inner] = outer as u32;
        self.parent_slot[inner] = slot;
        self.queue.clear();
        self.queue.push(inner as u32);
        let mut head = 0;
        while head < self.queue.len() {
            let node = self.queue[head] as usize;
            head += 1;
            let up = self.parent[node] as usize;
            let via = self.parent_slot[node];
            let (ci, cj) = self.cells[via as usize];
            self.depth[node] = self.depth[up] + 1;
            self.potential[node] =
                self.cost[ci as usize * self.n + cj as usize] - self.potential[up];
            for k in 0..self.adjacency[node].len() {
                let s = self.adjacency[node][k];
                if s == via {
                    continue;
                }
                let (ri, rj) = self.cells[s as usize];
                let other = if node < m { m + rj as usize } else { ri as usize };
                self.parent[other] = node as u32;
                self.parent_slot[other] = s;
                self.queue.push(other as u32);
            }
        }
    }
}

fn detach(list: &mut Vec<u32>, slot: u32) {
    if let Some(pos) = list.iter().position(|&s| s == slot) {
        list.swap_remove(pos);
    }
}
