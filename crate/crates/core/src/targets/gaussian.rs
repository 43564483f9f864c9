use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{check_point, spd_cholesky, Target};
use crate::error::{Error, Result};
use crate::points::Points;

/// Multivariate normal `N(mean, covariance)`.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_normalizer: f64,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if covariance.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, got: covariance.nrows() });
        }
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("mean".into()));
        }
        let chol = spd_cholesky(&covariance)?;
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let log_normalizer = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        let precision = chol.inverse();
        Ok(Self {
            mean: DVector::from_vec(mean),
            covariance,
            precision,
            chol,
            log_normalizer,
        })
    }

    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], DMatrix::identity(dim, dim))
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// `log N(x)`, skipping input validation.
    pub(crate) fn log_pdf(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.mean;
        let maha = (&self.precision * &diff).dot(&diff);
        self.log_normalizer - 0.5 * maha
    }

    /// `-P (x - mean)`, skipping input validation.
    pub(crate) fn grad_log_pdf(&self, x: &[f64]) -> DVector<f64> {
        let diff = DVector::from_column_slice(x) - &self.mean;
        -(&self.precision * diff)
    }

    pub(crate) fn draw(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| StandardNormal.sample(rng));
        &self.mean + self.chol.l_dirty().lower_triangle() * z
    }
}

impl Target for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_point(self.dim(), x)?;
        Ok(self.log_pdf(x))
    }

    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(self.dim(), x)?;
        Ok(self.grad_log_pdf(x).as_slice().to_vec())
    }

    fn score_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_point(self.dim(), x)?;
        Ok(-&self.precision)
    }

    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Points> {
        let d = self.dim();
        let mut out = Points::zeros(n, d);
        for i in 0..n {
            out.row_mut(i).copy_from_slice(self.draw(rng).as_slice());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::sample_reference;
    use approx::assert_relative_eq;

    #[test]
    fn standard_normal_log_density_at_zero() {
        let t = GaussianTarget::standard(1).unwrap();
        assert_relative_eq!(t.log_density(&[0.0]).unwrap(), -0.918938533204673, epsilon = 1e-12);
    }

    #[test]
    fn log_density_at_mean_is_log_normalizer() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let t = GaussianTarget::new(vec![1.0, -1.0], cov.clone()).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI * cov).determinant().ln();
        assert_relative_eq!(t.log_density(&[1.0, -1.0]).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn score_and_jacobian_closed_forms() {
        let t = GaussianTarget::standard(1).unwrap();
        assert_eq!(t.score(&[2.0]).unwrap(), vec![-2.0]);
        assert_eq!(t.score_jacobian(&[0.7]).unwrap()[(0, 0)], -1.0);

        let t = GaussianTarget::new(vec![0.0, 0.0], DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0])))
            .unwrap();
        let j = t.score_jacobian(&[3.0, -1.0]).unwrap();
        assert_relative_eq!(j[(0, 0)], -0.5, epsilon = 1e-15);
        assert_relative_eq!(j[(1, 1)], -1.0, epsilon = 1e-15);
        assert_eq!(j[(0, 1)], 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = GaussianTarget::standard(2).unwrap();
        assert!(matches!(t.log_density(&[0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(t.score(&[f64::NAN, 0.0]), Err(Error::NonFinite(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(GaussianTarget::new(vec![0.0, 0.0], asym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianTarget::new(vec![0.0, 0.0], indefinite).is_err());
    }

    #[test]
    fn sample_mean_within_clt_bound() {
        let t = GaussianTarget::standard(1).unwrap();
        let n = 100_000;
        let s = sample_reference(&t, n, 7).unwrap();
        let mean = s.as_flat().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let t = GaussianTarget::standard(3).unwrap();
        assert_eq!(sample_reference(&t, 1, 42).unwrap(), sample_reference(&t, 1, 42).unwrap());
    }
}
