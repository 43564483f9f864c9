use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{check_point, Target};
use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;
const JACOBIAN_STEP: f64 = 1e-5;

/// Treatment of the `-log(1 + ·ᵀ·)` term of the hyperparameter posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpPrior {
    /// `-log(1 + xᵀx)` over the input data vector: a constant in `φ`.
    #[default]
    LiteralConstant,
    /// `-log(1 + φᵀφ)`.
    PhiPrior,
}

/// Posterior over the two log-hyperparameters `φ = (φ₁, φ₂)` of a zero-mean GP
/// with kernel `K_ij = exp(φ₁) exp(-exp(φ₂) (x_i - x_j)²)` and fixed noise.
#[derive(Debug, Clone)]
pub struct GpRegressionTarget {
    y: DVector<f64>,
    noise_variance: f64,
    prior: GpPrior,
    sq_diffs: DMatrix<f64>,
    data_prior: f64,
}

struct Evaluation {
    log_density: f64,
    score: Option<[f64; 2]>,
}

impl GpRegressionTarget {
    pub const DEFAULT_NOISE_VARIANCE: f64 = 0.04;

    pub fn new(x: Vec<f64>, y: Vec<f64>, noise_variance: f64, prior: GpPrior) -> Result<Self> {
        let n = x.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!("GP needs at least 2 observations, got {n}")));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        if !x.iter().chain(&y).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("GP data".into()));
        }
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(Error::InvalidInput("noise variance must be positive".into()));
        }
        let sq_diffs = DMatrix::from_fn(n, n, |i, j| (x[i] - x[j]).powi(2));
        let data_prior = -(1.0 + x.iter().map(|v| v * v).sum::<f64>()).ln();
        Ok(Self { y: DVector::from_vec(y), noise_variance, prior, sq_diffs, data_prior })
    }

    pub fn num_observations(&self) -> usize {
        self.y.len()
    }

    pub fn prior(&self) -> GpPrior {
        self.prior
    }

    fn signal_kernel(&self, phi: &[f64]) -> DMatrix<f64> {
        let amp = phi[0].exp();
        let rate = phi[1].exp();
        self.sq_diffs.map(|d| amp * (-rate * d).exp())
    }

    fn factor(&self, k: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
        let n = k.nrows();
        let mut ky = k.clone();
        for i in 0..n {
            ky[(i, i)] += self.noise_variance;
        }
        if let Some(c) = Cholesky::new(ky.clone()) {
            return Ok(c);
        }
        let mut jitter = JITTER_START;
        while jitter <= JITTER_MAX * (1.0 + 1e-9) {
            let mut jittered = ky.clone();
            for i in 0..n {
                jittered[(i, i)] += jitter;
            }
            if let Some(c) = Cholesky::new(jittered) {
                return Ok(c);
            }
            jitter *= 10.0;
        }
        Err(Error::Cholesky { jitter: JITTER_MAX })
    }

    fn evaluate(&self, phi: &[f64], with_score: bool) -> Result<Evaluation> {
        check_point(2, phi)?;
        let k = self.signal_kernel(phi);
        let chol = self.factor(&k)?;
        let alpha = chol.solve(&self.y);
        let quad = self.y.dot(&alpha);
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let (prior, prior_grad) = match self.prior {
            GpPrior::LiteralConstant => (self.data_prior, [0.0, 0.0]),
            GpPrior::PhiPrior => {
                let s = 1.0 + phi[0] * phi[0] + phi[1] * phi[1];
                (-s.ln(), [-2.0 * phi[0] / s, -2.0 * phi[1] / s])
            }
        };
        let log_density = -0.5 * quad - 0.5 * log_det + prior;
        if !with_score {
            return Ok(Evaluation { log_density, score: None });
        }

        // ∂/∂φ_m = ½ αᵀ(∂K)α − ½ tr(K_y⁻¹ ∂K), with ∂K/∂φ₁ = K and
        // ∂K/∂φ₂ = −exp(φ₂)(x_i − x_j)² K.
        let inv = chol.inverse();
        let rate = phi[1].exp();
        let n = self.y.len();
        let (mut quad1, mut quad2, mut tr1, mut tr2) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                let kij = k[(i, j)];
                let dk2 = -rate * self.sq_diffs[(i, j)] * kij;
                let aa = alpha[i] * alpha[j];
                quad1 += aa * kij;
                quad2 += aa * dk2;
                tr1 += inv[(i, j)] * kij;
                tr2 += inv[(i, j)] * dk2;
            }
        }
        let score = [
            0.5 * quad1 - 0.5 * tr1 + prior_grad[0],
            0.5 * quad2 - 0.5 * tr2 + prior_grad[1],
        ];
        Ok(Evaluation { log_density, score: Some(score) })
    }
}

impl Target for GpRegressionTarget {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate(x, false)?.log_density)
    }

    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(x, true)?.score.expect("requested").to_vec())
    }

    fn log_density_and_score(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let e = self.evaluate(x, true)?;
        Ok((e.log_density, e.score.expect("requested").to_vec()))
    }

    fn has_analytic_jacobian(&self) -> bool {
        false
    }

    /// Central differences of the analytic score, symmetrized.
    fn score_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_point(2, x)?;
        let mut jac = DMatrix::zeros(2, 2);
        let mut probe = x.to_vec();
        for col in 0..2 {
            let step = JACOBIAN_STEP * (1.0 + x[col].abs());
            probe[col] = x[col] + step;
            let up = self.score(&probe)?;
            probe[col] = x[col] - step;
            let down = self.score(&probe)?;
            probe[col] = x[col];
            for row in 0..2 {
                jac[(row, col)] = (up[row] - down[row]) / (2.0 * step);
            }
        }
        let sym = 0.5 * (&jac + jac.transpose());
        Ok(sym)
    }
}
