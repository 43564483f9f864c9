use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use super::{check_point, GaussianTarget, Target};
use crate::error::{Error, Result};
use crate::points::{log_sum_exp, Points};

#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub weight: f64,
    pub gaussian: GaussianTarget,
}

/// Finite mixture of Gaussians `Σ_j w_j N(m_j, C_j)`.
#[derive(Debug, Clone)]
pub struct GaussianMixtureTarget {
    components: Vec<MixtureComponent>,
    log_weights: Vec<f64>,
    dim: usize,
}

impl GaussianMixtureTarget {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidInput("mixture needs at least one component".into()))?;
        let dim = first.gaussian.dim();
        let mut total = 0.0;
        for (j, c) in components.iter().enumerate() {
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(Error::InvalidInput(format!("component {j} weight must be positive")));
            }
            if c.gaussian.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.gaussian.dim() });
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("component weights sum to {total}, not 1")));
        }
        let log_weights = components.iter().map(|c| c.weight.ln()).collect();
        Ok(Self { components, log_weights, dim })
    }

    /// Convenience constructor from `(weight, mean, covariance)` triples.
    pub fn from_parts(parts: Vec<(f64, Vec<f64>, DMatrix<f64>)>) -> Result<Self> {
        let components = parts
            .into_iter()
            .map(|(weight, mean, cov)| {
                Ok(MixtureComponent { weight, gaussian: GaussianTarget::new(mean, cov)? })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    /// The two-component planar mixture with weights 1/3 and 2/3, means
    /// (-2, 0) and (2, 0) and identity covariances.
    pub fn default_planar() -> Self {
        Self::from_parts(vec![
            (1.0 / 3.0, vec![-2.0, 0.0], DMatrix::identity(2, 2)),
            (2.0 / 3.0, vec![2.0, 0.0], DMatrix::identity(2, 2)),
        ])
        .expect("default mixture is valid")
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    fn component_log_joint(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.gaussian.log_pdf(x))
            .collect()
    }

    /// Posterior component probabilities `r_j(x)`.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(self.dim, x)?;
        Ok(self.responsibilities_unchecked(x))
    }

    fn responsibilities_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let joint = self.component_log_joint(x);
        let lse = log_sum_exp(&joint);
        joint.iter().map(|l| (l - lse).exp()).collect()
    }

    fn score_parts(&self, x: &[f64]) -> (Vec<f64>, Vec<DVector<f64>>, DVector<f64>) {
        let resp = self.responsibilities_unchecked(x);
        let scores: Vec<DVector<f64>> =
            self.components.iter().map(|c| c.gaussian.grad_log_pdf(x)).collect();
        let mut total = DVector::zeros(self.dim);
        for (r, s) in resp.iter().zip(&scores) {
            total.axpy(*r, s, 1.0);
        }
        (resp, scores, total)
    }
}

impl Target for GaussianMixtureTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_point(self.dim, x)?;
        Ok(log_sum_exp(&self.component_log_joint(x)))
    }

    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(self.dim, x)?;
        Ok(self.score_parts(x).2.as_slice().to_vec())
    }

    // ∇s = Σ r_j (−P_j) + Σ r_j s_j s_jᵀ − s sᵀ
    fn score_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_point(self.dim, x)?;
        let (resp, scores, total) = self.score_parts(x);
        let mut jac = -(&total * total.transpose());
        for ((r, s), c) in resp.iter().zip(&scores).zip(&self.components) {
            jac -= *r * c.gaussian.precision();
            jac += *r * (s * s.transpose());
        }
        Ok(jac)
    }

    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Points> {
        let mut out = Points::zeros(n, self.dim);
        for i in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = self.components.len() - 1;
            for (j, c) in self.components.iter().enumerate() {
                acc += c.weight;
                if u < acc {
                    pick = j;
                    break;
                }
            }
            let draw = self.components[pick].gaussian.draw(rng);
            out.row_mut(i).copy_from_slice(draw.as_slice());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{finite_difference_gradient, sample_reference};
    use approx::assert_relative_eq;

    fn symmetric_1d() -> GaussianMixtureTarget {
        GaussianMixtureTarget::from_parts(vec![
            (0.5, vec![-1.0], DMatrix::identity(1, 1)),
            (0.5, vec![1.0], DMatrix::identity(1, 1)),
        ])
        .unwrap()
    }

    #[test]
    fn equal_mixture_log_density_at_origin() {
        let t = symmetric_1d();
        let expected = (-0.5f64).exp().ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(t.log_density(&[0.0]).unwrap(), expected, epsilon = 1e-12);
        assert_relative_eq!(expected, -1.418938533204673, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_mixture_score_vanishes_at_origin() {
        assert!(symmetric_1d().score(&[0.0]).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn far_from_modes_is_finite() {
        let t = GaussianMixtureTarget::default_planar();
        let lp = t.log_density(&[400.0, -300.0]).unwrap();
        assert!(lp.is_finite());
        assert!(t.score(&[400.0, -300.0]).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let t = GaussianMixtureTarget::from_parts(vec![
            (0.3, vec![-1.0, 0.5], DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5])),
            (0.7, vec![1.5, 0.0], DMatrix::from_row_slice(2, 2, &[0.7, -0.1, -0.1, 1.2])),
        ])
        .unwrap();
        for x in [[0.1, 0.2], [-1.0, 1.0], [2.0, -0.5]] {
            let jac = t.score_jacobian(&x).unwrap();
            for row in 0..2 {
                let fd = finite_difference_gradient(|p| Ok(t.score(p)?[row]), &x, 1e-5).unwrap();
                for col in 0..2 {
                    let err = (jac[(row, col)] - fd[col]).abs() / (1.0 + jac[(row, col)].abs());
                    assert!(err < 1e-5, "({row},{col}) {} vs {}", jac[(row, col)], fd[col]);
                }
            }
            assert!((jac[(0, 1)] - jac[(1, 0)]).abs() < 1e-12);
        }
    }

    #[test]
    fn ancestral_sampling_respects_weights() {
        let t = GaussianMixtureTarget::from_parts(vec![
            (1.0 / 3.0, vec![-50.0], DMatrix::identity(1, 1)),
            (2.0 / 3.0, vec![50.0], DMatrix::identity(1, 1)),
        ])
        .unwrap();
        let n = 100_000;
        let s = sample_reference(&t, n, 3).unwrap();
        let frac = s.as_flat().iter().filter(|v| **v > 0.0).count() as f64 / n as f64;
        assert!((frac - 2.0 / 3.0).abs() < 0.01, "{frac}");
    }

    #[test]
    fn rejects_unnormalized_weights() {
        let r = GaussianMixtureTarget::from_parts(vec![
            (0.5, vec![0.0], DMatrix::identity(1, 1)),
            (0.6, vec![1.0], DMatrix::identity(1, 1)),
        ]);
        assert!(r.is_err());
    }
}
