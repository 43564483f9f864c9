//! Exact discrete optimal transport with squared-Euclidean cost.
//!
//! The transportation problem is solved by the primal network simplex method
//! on the complete bipartite graph: a spanning-tree basis of `n + m − 1` cells
//! is initialised by the north-west corner rule, node potentials are
//! recomputed from the tree after each pivot, entering cells are chosen by
//! block pricing, and the leaving cell is the first minimum-flow backward arc
//! on the cycle closed by the entering cell.

use std::collections::VecDeque;

use serde::Serialize;

use super::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::points::sq_dist;

/// Largest dense cost matrix `w2_exact` accepts.
pub const MAX_OT_CELLS: usize = 2_000_000;

const MARGINAL_TOLERANCE: f64 = 1e-9;

/// Sparse optimal plan over the original atom indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    pub entries: Vec<(usize, usize, f64)>,
    pub objective: f64,
}

/// `W₂(μ, ν)` and an optimal plan.
pub fn w2_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, TransportPlan)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: nu.dim() });
    }
    let (sum_mu, sum_nu) = (mu.masses.iter().sum::<f64>(), nu.masses.iter().sum::<f64>());
    if (sum_mu - sum_nu).abs() > MARGINAL_TOLERANCE {
        return Err(Error::InvalidInput(format!(
            "marginal mismatch: total masses {sum_mu} and {sum_nu}"
        )));
    }
    let rows: Vec<usize> = (0..mu.len()).filter(|&i| mu.masses[i] > 0.0).collect();
    let cols: Vec<usize> = (0..nu.len()).filter(|&j| nu.masses[j] > 0.0).collect();
    let cells = rows.len() * cols.len();
    if cells > MAX_OT_CELLS {
        return Err(Error::InvalidInput(format!(
            "{} x {} transport problem exceeds {MAX_OT_CELLS} cells; subsample the measures",
            rows.len(),
            cols.len()
        )));
    }
    let mut cost = Vec::with_capacity(cells);
    for &i in &rows {
        for &j in &cols {
            cost.push(sq_dist(mu.atoms.row(i), nu.atoms.row(j)));
        }
    }
    let supply: Vec<f64> = rows.iter().map(|&i| mu.masses[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| nu.masses[j]).collect();

    let mut solver = Simplex::new(supply, demand, cost);
    solver.solve()?;

    let mut entries = Vec::new();
    let mut objective = 0.0;
    for c in &solver.basis {
        if c.flow > 0.0 {
            objective += c.flow * solver.cost[c.row * solver.m + c.col];
            entries.push((rows[c.row], cols[c.col], c.flow));
        }
    }
    entries.sort_by_key(|e| (e.0, e.1));
    Ok((objective.max(0.0).sqrt(), TransportPlan { entries, objective }))
}

#[derive(Debug, Clone, Copy)]
struct BasicCell {
    row: usize,
    col: usize,
    flow: f64,
}

struct Simplex {
    n: usize,
    m: usize,
    cost: Vec<f64>,
    basis: Vec<BasicCell>,
    /// Basis slot of each cell, `usize::MAX` when non-basic.
    slot_of: Vec<usize>,
    /// Incident basis slots per node; rows are `0..n`, columns `n..n + m`.
    adjacency: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Simplex {
    fn new(supply: Vec<f64>, demand: Vec<f64>, cost: Vec<f64>) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let mut s = Self {
            n,
            m,
            cost,
            basis: Vec::with_capacity(n + m - 1),
            slot_of: vec![usize::MAX; n * m],
            adjacency: vec![Vec::new(); n + m],
            u: vec![0.0; n],
            v: vec![0.0; m],
        };
        s.north_west_corner(supply, demand);
        s
    }

    fn north_west_corner(&mut self, mut supply: Vec<f64>, mut demand: Vec<f64>) {
        let (mut i, mut j) = (0, 0);
        loop {
            let flow = supply[i].min(demand[j]).max(0.0);
            supply[i] -= flow;
            demand[j] -= flow;
            self.insert(i, j, flow);
            if i == self.n - 1 && j == self.m - 1 {
                break;
            }
            if i == self.n - 1 {
                j += 1;
            } else if j == self.m - 1 || supply[i] <= demand[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    fn insert(&mut self, row: usize, col: usize, flow: f64) {
        let slot = self.basis.len();
        self.basis.push(BasicCell { row, col, flow });
        self.slot_of[row * self.m + col] = slot;
        self.adjacency[row].push(slot);
        self.adjacency[self.n + col].push(slot);
    }

    fn other_end(&self, slot: usize, node: usize) -> usize {
        let c = self.basis[slot];
        if node < self.n {
            self.n + c.col
        } else {
            c.row
        }
    }

    fn compute_potentials(&mut self) {
        let total = self.n + self.m;
        let mut seen = vec![false; total];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        self.u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &slot in &self.adjacency[node] {
                let next = self.other_end(slot, node);
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let c = self.basis[slot];
                let cij = self.cost[c.row * self.m + c.col];
                if next < self.n {
                    self.u[next] = cij - self.v[c.col];
                } else {
                    self.v[c.col] = cij - self.u[c.row];
                }
                queue.push_back(next);
            }
        }
    }

    /// Basis slots along the tree path from `from` to `to`.
    fn tree_path(&self, from: usize, to: usize) -> Vec<usize> {
        let total = self.n + self.m;
        let mut parent_slot = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &slot in &self.adjacency[node] {
                let next = self.other_end(slot, node);
                if !seen[next] {
                    seen[next] = true;
                    parent_slot[next] = slot;
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = to;
        while node != from {
            let slot = parent_slot[node];
            path.push(slot);
            node = self.other_end(slot, node);
        }
        path.reverse();
        path
    }

    fn solve(&mut self) -> Result<()> {
        let cells = self.n * self.m;
        let max_cost = self.cost.iter().copied().fold(0.0, f64::max);
        let eps = 1e-12 * (1.0 + max_cost);
        let block = ((cells as f64).sqrt().ceil() as usize).clamp(1, cells);
        let max_pivots = 50 * cells + 10_000;
        let mut cursor = 0;
        let mut pivots = 0;
        self.compute_potentials();
        loop {
            let mut scanned = 0;
            let mut entering = None;
            while scanned < cells {
                let mut best = -eps;
                let end = (scanned + block).min(cells);
                while scanned < end {
                    let cell = cursor;
                    cursor = (cursor + 1) % cells;
                    scanned += 1;
                    if self.slot_of[cell] != usize::MAX {
                        continue;
                    }
                    let (i, j) = (cell / self.m, cell % self.m);
                    let reduced = self.cost[cell] - self.u[i] - self.v[j];
                    if reduced < best {
                        best = reduced;
                        entering = Some((i, j));
                    }
                }
                if entering.is_some() {
                    break;
                }
            }
            let Some((i, j)) = entering else {
                return Ok(());
            };
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::InvalidInput(format!(
                    "network simplex did not converge within {max_pivots} pivots"
                )));
            }
            self.pivot(i, j);
            self.compute_potentials();
        }
    }

    fn pivot(&mut self, i: usize, j: usize) {
        // Cycle: entering (i, j) forward, then the tree path from column j back
        // to row i with alternating backward/forward arcs.
        let path = self.tree_path(self.n + j, i);
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for &slot in path.iter().step_by(2) {
            if self.basis[slot].flow < theta {
                theta = self.basis[slot].flow;
                leaving = slot;
            }
        }
        for (k, &slot) in path.iter().enumerate() {
            if k % 2 == 0 {
                self.basis[slot].flow -= theta;
            } else {
                self.basis[slot].flow += theta;
            }
        }
        let old = self.basis[leaving];
        self.slot_of[old.row * self.m + old.col] = usize::MAX;
        self.adjacency[old.row].retain(|&s| s != leaving);
        self.adjacency[self.n + old.col].retain(|&s| s != leaving);

        self.basis[leaving] = BasicCell { row: i, col: j, flow: theta };
        self.slot_of[i * self.m + j] = leaving;
        self.adjacency[i].push(leaving);
        self.adjacency[self.n + j].push(leaving);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::Points;
    use approx::assert_relative_eq;

    fn line(xs: &[f64]) -> Points {
        Points::from_rows(&xs.iter().map(|x| [*x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn single_atoms() {
        let a = DiscreteMeasure::uniform(line(&[0.0])).unwrap();
        let b = DiscreteMeasure::uniform(line(&[3.0])).unwrap();
        assert_relative_eq!(w2_exact(&a, &b).unwrap().0, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn split_mass_to_midpoint() {
        let a = DiscreteMeasure::uniform(line(&[0.0, 2.0])).unwrap();
        let b = DiscreteMeasure::uniform(line(&[1.0])).unwrap();
        let (d, plan) = w2_exact(&a, &b).unwrap();
        assert_relative_eq!(d, 1.0, epsilon = 1e-15);
        assert_eq!(plan.entries.len(), 2);
    }

    #[test]
    fn identical_measures_use_identity_plan() {
        let a = DiscreteMeasure::new(line(&[3.0, 0.0, 1.0]), vec![0.2, 0.5, 0.3]).unwrap();
        let (d, plan) = w2_exact(&a, &a).unwrap();
        assert!(d.abs() < 1e-12);
        assert!(plan.entries.iter().all(|(i, j, _)| i == j));
    }

    #[test]
    fn zero_masses_are_dropped() {
        let a = DiscreteMeasure::new(line(&[0.0, 100.0]), vec![1.0, 0.0]).unwrap();
        let b = DiscreteMeasure::uniform(line(&[2.0])).unwrap();
        let (d, plan) = w2_exact(&a, &b).unwrap();
        assert_relative_eq!(d, 2.0, epsilon = 1e-15);
        assert_eq!(plan.entries, vec![(0, 0, 1.0)]);
    }

    #[test]
    fn one_dimensional_matches_sorted_coupling() {
        // Uniform measures of equal size in 1-D: the monotone matching is optimal.
        let xs = [0.3, -1.2, 2.2, 0.9, -0.1, 1.7];
        let ys = [1.1, -0.4, 0.0, 2.5, -2.0, 0.6];
        let a = DiscreteMeasure::uniform(line(&xs)).unwrap();
        let b = DiscreteMeasure::uniform(line(&ys)).unwrap();
        let mut sx = xs.to_vec();
        let mut sy = ys.to_vec();
        sx.sort_by(f64::total_cmp);
        sy.sort_by(f64::total_cmp);
        let expected: f64 = sx.iter().zip(&sy).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / 6.0;
        let (d, _) = w2_exact(&a, &b).unwrap();
        assert_relative_eq!(d * d, expected, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let a = DiscreteMeasure::uniform(line(&[0.0])).unwrap();
        let b = DiscreteMeasure::uniform(Points::from_rows(&[[0.0, 1.0]]).unwrap()).unwrap();
        assert!(w2_exact(&a, &b).is_err());
        let skew = DiscreteMeasure { atoms: line(&[0.0]), masses: vec![0.5] };
        assert!(w2_exact(&a, &skew).is_err());
    }
}
