use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Target;
use crate::error::{Error, Result};
use crate::points::Points;

/// Axis-aligned box `[lo₀, hi₀] × [lo₁, hi₁]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

const MIN_RESOLUTION: usize = 50;

/// Reference sample for a 2-D target known up to a constant: evaluates `log π`
/// at the cell centres of a `resolution × resolution` grid, turns the values
/// into cell masses, draws cells categorically and jitters uniformly inside
/// each drawn cell.
pub fn grid_reference(
    target: &dyn Target,
    bounds: GridBounds,
    resolution: usize,
    n: usize,
    seed: u64,
) -> Result<Points> {
    if target.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: target.dim() });
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidInput(format!(
            "grid resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("reference size must be at least 1".into()));
    }
    for (lo, hi) in [bounds.x, bounds.y] {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput(format!("invalid grid interval [{lo}, {hi}]")));
        }
    }
    let wx = (bounds.x.1 - bounds.x.0) / resolution as f64;
    let wy = (bounds.y.1 - bounds.y.0) / resolution as f64;
    let log_area = (wx * wy).ln();

    let mut log_mass = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        let cx = bounds.x.0 + (i as f64 + 0.5) * wx;
        for j in 0..resolution {
            let cy = bounds.y.0 + (j as f64 + 0.5) * wy;
            log_mass.push(target.log_density(&[cx, cy])? + log_area);
        }
    }
    let max = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::InvalidInput("all grid masses underflow; bounds miss the mass".into()));
    }
    let mut cumulative = Vec::with_capacity(log_mass.len());
    let mut acc = 0.0;
    for l in &log_mass {
        acc += (l - max).exp();
        cumulative.push(acc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Points::zeros(n, 2);
    for k in 0..n {
        let u = rng.random::<f64>() * acc;
        let cell = cumulative.partition_point(|c| *c <= u).min(cumulative.len() - 1);
        let (i, j) = (cell / resolution, cell % resolution);
        let row = out.row_mut(k);
        row[0] = bounds.x.0 + (i as f64 + rng.random::<f64>()) * wx;
        row[1] = bounds.y.0 + (j as f64 + rng.random::<f64>()) * wy;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{sample_reference, GaussianTarget, GpPrior, GpRegressionTarget};

    const BOX: GridBounds = GridBounds { x: (-5.0, 5.0), y: (-5.0, 5.0) };

    #[test]
    fn recovers_standard_gaussian_covariance() {
        let t = GaussianTarget::standard(2).unwrap();
        let n = 10_000;
        let s = grid_reference(&t, BOX, 200, n, 1).unwrap();
        let mean: Vec<f64> = (0..2).map(|k| s.rows().map(|r| r[k]).sum::<f64>() / n as f64).collect();
        let mut frob = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let c = s.rows().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>()
                    / (n - 1) as f64;
                let target = if a == b { 1.0 } else { 0.0 };
                frob += (c - target).powi(2);
            }
        }
        assert!(frob.sqrt() < 0.05, "frobenius error {}", frob.sqrt());
    }

    #[test]
    fn degenerate_resolution_rejected() {
        let t = GaussianTarget::standard(2).unwrap();
        assert!(grid_reference(&t, BOX, 1, 10, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let t = GaussianTarget::standard(2).unwrap();
        assert_eq!(
            grid_reference(&t, BOX, 60, 50, 9).unwrap(),
            grid_reference(&t, BOX, 60, 50, 9).unwrap()
        );
    }

    #[derive(Debug)]
    struct Vanishing;

    impl Target for Vanishing {
        fn dim(&self) -> usize {
            2
        }
        fn log_density(&self, _: &[f64]) -> Result<f64> {
            Ok(f64::NEG_INFINITY)
        }
        fn score(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0, 0.0])
        }
        fn score_jacobian(&self, _: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
            Ok(nalgebra::DMatrix::zeros(2, 2))
        }
    }

    #[test]
    fn underflowing_masses_are_an_error() {
        assert!(grid_reference(&Vanishing, BOX, 50, 10, 0).is_err());
    }

    #[test]
    fn gp_has_no_exact_sampler() {
        let t = GpRegressionTarget::new(vec![0.0, 1.0], vec![0.0, 1.0], 0.04, GpPrior::LiteralConstant).unwrap();
        assert!(matches!(sample_reference(&t, 5, 0), Err(Error::Unsupported(_))));
    }
}
