//! Analytic target distributions.
//!
//! Every target exposes `log π`, the score `s(x) = ∇ log π(x)` and the score
//! Jacobian `∇s(x)`. Gaussian and mixture targets are fully normalized and can
//! draw i.i.d. reference samples; the GP hyperparameter posterior is known only
//! up to a constant and is referenced through [`grid_reference`].

mod gaussian;
mod gp;
mod lidar;
mod mixture;
mod reference;

use nalgebra::DMatrix;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use gaussian::GaussianTarget;
pub use gp::{GpPrior, GpRegressionTarget};
pub use lidar::{load_lidar_csv, synthetic_lidar, RegressionData};
pub use mixture::{GaussianMixtureTarget, MixtureComponent};
pub use reference::{grid_reference, GridBounds};

use crate::error::{Error, Result};
use crate::points::Points;

/// Capability record of a target distribution `π` on `R^d`.
pub trait Target: Send + Sync + std::fmt::Debug {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> Result<f64>;

    fn score(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Hessian of `log π`, i.e. the Jacobian of the score.
    fn score_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>>;

    /// `false` when [`Target::score_jacobian`] is a finite-difference estimate.
    fn has_analytic_jacobian(&self) -> bool {
        true
    }

    fn log_density_and_score(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.log_density(x)?, self.score(x)?))
    }

    /// Draws `n` i.i.d. samples. Targets without an exact sampler return
    /// [`Error::Unsupported`].
    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Points> {
        let _ = (n, rng);
        Err(Error::Unsupported(
            "target has no exact sampler; use grid_reference".into(),
        ))
    }
}

/// Seeded i.i.d. reference sample of size `n`.
pub fn sample_reference(target: &dyn Target, n: usize, seed: u64) -> Result<Points> {
    if n == 0 {
        return Err(Error::InvalidInput("reference size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    target.sample(n, &mut rng)
}

pub(crate) fn check_point(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(format!("{x:?}")));
    }
    Ok(())
}

/// Validates a covariance matrix and returns its Cholesky factor.
pub(crate) fn spd_cholesky(cov: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let d = cov.nrows();
    if d == 0 || cov.ncols() != d {
        return Err(Error::InvalidInput(format!(
            "covariance must be square with d >= 1, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if !cov.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("covariance".into()));
    }
    for i in 0..d {
        for j in 0..i {
            if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "covariance not symmetric at ({i},{j})"
                )));
            }
        }
    }
    nalgebra::Cholesky::new(cov.clone())
        .ok_or_else(|| Error::InvalidInput("covariance is not positive definite".into()))
}

/// Central finite-difference gradient of a scalar function.
pub fn finite_difference_gradient<F>(f: F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        probe[k] = x[k] + step;
        let up = f(&probe)?;
        probe[k] = x[k] - step;
        let down = f(&probe)?;
        probe[k] = x[k];
        grad.push((up - down) / (2.0 * step));
    }
    Ok(grad)
}
