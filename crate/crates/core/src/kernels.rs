//! RBF smoothing kernel, median-heuristic bandwidth and the Stein kernel.
//!
//! The RBF convention is `K(x, y) = exp(-‖x − y‖² / (2h²))`. With `r = x − y`
//! the derivatives used throughout are
//!
//! ```text
//! ∇_x K = −r/h² · K        ∇_y K = r/h² · K
//! ∇_x·∇_y K = (d/h² − ‖r‖²/h⁴) · K
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::{dot, sq_dist, Points};
use crate::targets::Target;

/// Bandwidth returned by [`median_bandwidth`] when all points coincide.
pub const DEGENERATE_BANDWIDTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthPolicy {
    Fixed(f64),
    MedianHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub bandwidth: BandwidthPolicy,
    /// Refresh period (iterations) of a data-driven bandwidth.
    #[serde(default = "default_recompute_every")]
    pub recompute_every: usize,
}

fn default_recompute_every() -> usize {
    1
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { bandwidth: BandwidthPolicy::MedianHeuristic, recompute_every: 1 }
    }
}

impl KernelConfig {
    pub fn fixed(h: f64) -> Self {
        Self { bandwidth: BandwidthPolicy::Fixed(h), recompute_every: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if let BandwidthPolicy::Fixed(h) = self.bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidInput(format!("fixed bandwidth must be positive, got {h}")));
            }
        }
        if self.recompute_every == 0 {
            return Err(Error::InvalidInput("recompute_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Bandwidth for the given particle positions.
    pub fn bandwidth_for(&self, positions: &Points) -> Result<f64> {
        match self.bandwidth {
            BandwidthPolicy::Fixed(h) => Ok(h),
            BandwidthPolicy::MedianHeuristic => median_bandwidth(positions),
        }
    }
}

pub fn rbf_value(x: &[f64], y: &[f64], h: f64) -> f64 {
    (-sq_dist(x, y) / (2.0 * h * h)).exp()
}

/// Kernel value and its gradient in the first argument.
pub fn rbf(x: &[f64], y: &[f64], h: f64) -> (f64, Vec<f64>) {
    let k = rbf_value(x, y, h);
    let h2 = h * h;
    let grad = x.iter().zip(y).map(|(a, b)| -(a - b) / h2 * k).collect();
    (k, grad)
}

/// `sqrt(median ‖x_i − x_j‖² / (2 ln(M + 1)))` over unordered pairs, ignoring weights.
pub fn median_bandwidth(positions: &Points) -> Result<f64> {
    let m = positions.len();
    if m < 2 {
        return Err(Error::InvalidInput(format!(
            "median bandwidth needs at least 2 points, got {m}"
        )));
    }
    let mut d2 = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            d2.push(sq_dist(positions.row(i), positions.row(j)));
        }
    }
    let mid = d2.len() / 2;
    let (_, upper, _) = d2.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let median = if d2.len() % 2 == 1 {
        upper
    } else {
        let lower = d2[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    if median <= 0.0 {
        return Ok(DEGENERATE_BANDWIDTH);
    }
    Ok((median / (2.0 * ((m + 1) as f64).ln())).sqrt())
}

/// `k_π(x, y)` together with `∇_y k_π(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinKernelEval {
    pub value: f64,
    pub grad_second_arg: Vec<f64>,
}

/// Stein kernel from precomputed scores. `jac_y` is `∇s(y)`; when `None` only
/// the value is computed and the gradient is left empty.
pub fn stein_kernel_from_scores(
    x: &[f64],
    score_x: &[f64],
    y: &[f64],
    score_y: &[f64],
    jac_y: Option<&DMatrix<f64>>,
    h: f64,
) -> SteinKernelEval {
    let d = x.len();
    let h2 = h * h;
    let h4 = h2 * h2;
    let r2 = sq_dist(x, y);
    let k = (-r2 / (2.0 * h2)).exp();

    // B = s(x)·s(y) + (s(x) − s(y))·r/h² + d/h² − ‖r‖²/h⁴
    let mut cross = 0.0;
    for i in 0..d {
        cross += (score_x[i] - score_y[i]) * (x[i] - y[i]);
    }
    let bracket = dot(score_x, score_y) + cross / h2 + d as f64 / h2 - r2 / h4;
    let value = k * bracket;

    let grad_second_arg = match jac_y {
        None => Vec::new(),
        Some(jac) => {
            // ∇_y k = K [ r/h²·B + Jᵀs(x) − Jᵀr/h² − (s(x) − s(y))/h² + 2r/h⁴ ]
            (0..d)
                .map(|c| {
                    let mut jt_sx = 0.0;
                    let mut jt_r = 0.0;
                    for row in 0..d {
                        jt_sx += jac[(row, c)] * score_x[row];
                        jt_r += jac[(row, c)] * (x[row] - y[row]);
                    }
                    let rc = x[c] - y[c];
                    k * (rc / h2 * bracket + jt_sx - jt_r / h2 - (score_x[c] - score_y[c]) / h2
                        + 2.0 * rc / h4)
                })
                .collect()
        }
    };
    SteinKernelEval { value, grad_second_arg }
}

pub fn stein_kernel(target: &dyn Target, x: &[f64], y: &[f64], h: f64) -> Result<SteinKernelEval> {
    check_bandwidth(h)?;
    let sx = target.score(x)?;
    let sy = target.score(y)?;
    let jac = target.score_jacobian(y)?;
    Ok(stein_kernel_from_scores(x, &sx, y, &sy, Some(&jac), h))
}

/// Stein Gram matrix `G_ij = k_π(x_i, x_j)`.
pub fn stein_gram(target: &dyn Target, positions: &Points, h: f64) -> Result<DMatrix<f64>> {
    check_bandwidth(h)?;
    let scores = positions.rows().map(|x| target.score(x)).collect::<Result<Vec<_>>>()?;
    let m = positions.len();
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = stein_kernel_from_scores(
                positions.row(i),
                &scores[i],
                positions.row(j),
                &scores[j],
                None,
                h,
            )
            .value;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    Ok(gram)
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{finite_difference_gradient, GaussianMixtureTarget, GaussianTarget};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rbf_at_coincident_points() {
        let (k, g) = rbf(&[0.3, -1.0], &[0.3, -1.0], 0.7);
        assert_eq!(k, 1.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rbf_hand_values() {
        let (k, g) = rbf(&[0.0], &[2.0], 1.0);
        assert_relative_eq!(k, 0.1353352832366127, epsilon = 1e-15);
        assert_relative_eq!(g[0], 0.2706705664732254, epsilon = 1e-15);
        let (k2, g2) = rbf(&[2.0], &[0.0], 1.0);
        assert_eq!(k, k2);
        assert_eq!(g[0], -g2[0]);
    }

    #[test]
    fn rbf_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let h = rng.random_range(0.5..2.0);
            let (_, g) = rbf(&x, &y, h);
            let fd = finite_difference_gradient(|p| Ok(rbf_value(p, &y, h)), &x, 1e-5).unwrap();
            for k in 0..3 {
                assert!((g[k] - fd[k]).abs() <= 1e-5 * (1.0 + g[k].abs()));
            }
        }
    }

    #[test]
    fn median_bandwidth_hand_value() {
        let p = Points::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let h = median_bandwidth(&p).unwrap();
        assert_relative_eq!(h, (4.0 / (2.0 * 4f64.ln())).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(h, 1.2011224087864498, epsilon = 1e-12);
    }

    #[test]
    fn median_bandwidth_edge_cases() {
        let same = Points::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(median_bandwidth(&same).unwrap(), DEGENERATE_BANDWIDTH);
        let one = Points::from_rows(&[[1.0]]).unwrap();
        assert!(median_bandwidth(&one).is_err());
        let p = Points::from_rows(&[[0.0], [1.0], [3.0], [7.5]]).unwrap();
        let shifted = Points::from_rows(&[[10.0], [11.0], [13.0], [17.5]]).unwrap();
        assert_relative_eq!(
            median_bandwidth(&p).unwrap(),
            median_bandwidth(&shifted).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn stein_kernel_symbolic_values() {
        let t = GaussianTarget::standard(1).unwrap();
        assert_relative_eq!(stein_kernel(&t, &[0.0], &[0.0], 1.0).unwrap().value, 1.0, epsilon = 1e-15);
        assert_relative_eq!(stein_kernel(&t, &[1.0], &[1.0], 1.0).unwrap().value, 2.0, epsilon = 1e-15);
        assert_relative_eq!(
            stein_kernel(&t, &[0.0], &[1.0], 1.0).unwrap().value,
            -(-0.5f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn stein_kernel_symmetry() {
        let t = GaussianMixtureTarget::default_planar();
        let a = stein_kernel(&t, &[0.3, 1.0], &[-1.0, 0.2], 0.9).unwrap();
        let b = stein_kernel(&t, &[-1.0, 0.2], &[0.3, 1.0], 0.9).unwrap();
        assert_relative_eq!(a.value, b.value, epsilon = 1e-14);
    }

    #[test]
    fn stein_gradient_matches_finite_differences() {
        let gauss = GaussianTarget::new(
            vec![0.5, -0.3],
            DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]),
        )
        .unwrap();
        let mix = GaussianMixtureTarget::default_planar();
        let targets: [&dyn Target; 2] = [&gauss, &mix];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for t in targets {
            for _ in 0..50 {
                let x: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
                let y: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
                let h = rng.random_range(0.5..2.0);
                let g = stein_kernel(t, &x, &y, h).unwrap().grad_second_arg;
                let fd = finite_difference_gradient(
                    |p| Ok(stein_kernel(t, &x, p, h)?.value),
                    &y,
                    1e-5,
                )
                .unwrap();
                for k in 0..2 {
                    assert!((g[k] - fd[k]).abs() <= 1e-5 * (1.0 + g[k].abs()), "{g:?} vs {fd:?}");
                }
            }
        }
    }

    #[test]
    fn gram_single_point_and_symmetry() {
        let t = GaussianTarget::standard(1).unwrap();
        let g = stein_gram(&t, &Points::from_rows(&[[0.0]]).unwrap(), 1.0).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.0, epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
        let p = Points::from_rows(&rows).unwrap();
        let g = stein_gram(&t, &p, 1.0).unwrap();
        assert!((&g - g.transpose()).amax() <= 1e-12);
        let min_eig = g.symmetric_eigenvalues().min();
        assert!(min_eig >= -1e-8, "{min_eig}");
    }

    #[test]
    fn bad_bandwidth_rejected() {
        let t = GaussianTarget::standard(1).unwrap();
        assert!(stein_kernel(&t, &[0.0], &[0.0], 0.0).is_err());
        assert!(KernelConfig::fixed(-1.0).validate().is_err());
        assert!(KernelConfig { recompute_every: 0, ..KernelConfig::default() }.validate().is_err());
    }
}
