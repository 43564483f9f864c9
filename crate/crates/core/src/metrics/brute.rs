//! Vertex enumeration for tiny transport problems, used as a test oracle for
//! the network simplex solver.

use super::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::points::sq_dist;

const MAX_ATOMS: usize = 4;

/// `W₂(μ, ν)` by enumerating every basic solution of the transportation
/// polytope (spanning trees of `n + m − 1` cells) and keeping the cheapest
/// feasible one. Only for `n, m ≤ 4`.
pub fn w2_bruteforce(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let (n, m) = (mu.len(), nu.len());
    if n > MAX_ATOMS || m > MAX_ATOMS {
        return Err(Error::InvalidInput(format!(
            "brute-force transport supports at most {MAX_ATOMS} atoms per side, got {n} x {m}"
        )));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: nu.dim() });
    }
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let basis_size = n + m - 1;
    let mut best = f64::INFINITY;
    for subset in 0u32..(1 << cells.len()) {
        if subset.count_ones() as usize != basis_size {
            continue;
        }
        let chosen: Vec<(usize, usize)> =
            (0..cells.len()).filter(|k| subset & (1 << k) != 0).map(|k| cells[k]).collect();
        if !is_spanning_tree(&chosen, n, m) {
            continue;
        }
        let Some(flows) = tree_flows(&chosen, &mu.masses, &nu.masses) else {
            continue;
        };
        let cost: f64 = chosen
            .iter()
            .zip(&flows)
            .map(|(&(i, j), f)| f * sq_dist(mu.atoms.row(i), nu.atoms.row(j)))
            .sum();
        best = best.min(cost);
    }
    if !best.is_finite() {
        return Err(Error::InvalidInput("no feasible transport plan".into()));
    }
    Ok(best.max(0.0).sqrt())
}

fn is_spanning_tree(cells: &[(usize, usize)], n: usize, m: usize) -> bool {
    let mut parent: Vec<usize> = (0..n + m).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j) in cells {
        let (a, b) = (find(&mut parent, i), find(&mut parent, n + j));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

/// Unique flows on a spanning tree by repeatedly peeling leaves; `None` when
/// any flow is negative.
fn tree_flows(cells: &[(usize, usize)], supply: &[f64], demand: &[f64]) -> Option<Vec<f64>> {
    let n = supply.len();
    let mut residual: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut flows = vec![0.0; cells.len()];
    let mut done = vec![false; cells.len()];
    for _ in 0..cells.len() {
        let mut degree = vec![0usize; residual.len()];
        for (k, &(i, j)) in cells.iter().enumerate() {
            if !done[k] {
                degree[i] += 1;
                degree[n + j] += 1;
            }
        }
        let (k, leaf) = cells.iter().enumerate().find_map(|(k, &(i, j))| {
            if done[k] {
                None
            } else if degree[i] == 1 {
                Some((k, i))
            } else if degree[n + j] == 1 {
                Some((k, n + j))
            } else {
                None
            }
        })?;
        let (i, j) = cells[k];
        let other = if leaf == i { n + j } else { i };
        let f = residual[leaf];
        if f < -1e-12 {
            return None;
        }
        flows[k] = f;
        residual[leaf] = 0.0;
        residual[other] -= f;
        done[k] = true;
    }
    Some(flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::Points;

    #[test]
    fn identity_cases() {
        let atoms = Points::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]).unwrap();
        let a = DiscreteMeasure::uniform(atoms).unwrap();
        assert!(w2_bruteforce(&a, &a).unwrap() < 1e-12);
        let b = DiscreteMeasure::uniform(Points::from_rows(&[[0.0], [1.0]]).unwrap()).unwrap();
        assert!(w2_bruteforce(&b, &b).unwrap() < 1e-12);
    }

    #[test]
    fn too_large_rejected() {
        let p = Points::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]]).unwrap();
        let a = DiscreteMeasure::uniform(p).unwrap();
        assert!(w2_bruteforce(&a, &a).is_err());
    }
}
