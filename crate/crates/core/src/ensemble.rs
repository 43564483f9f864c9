use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::Points;

/// Tolerance on `|Σ a_i − 1|` for a valid ensemble.
pub const MASS_TOLERANCE: f64 = 1e-10;

/// Weighted particles `μ̃ = Σ a_i δ_{x_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub positions: Points,
    pub weights: Vec<f64>,
}

impl Ensemble {
    pub fn new(positions: Points, weights: Vec<f64>) -> Result<Self> {
        let e = Self { positions, weights };
        e.validate()?;
        Ok(e)
    }

    /// Equal weights `1/M`.
    pub fn uniform(positions: Points) -> Result<Self> {
        let m = positions.len();
        if m == 0 {
            return Err(Error::InvalidInput("ensemble needs at least one particle".into()));
        }
        Self::new(positions, vec![1.0 / m as f64; m])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions.dim()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::InvalidInput("ensemble needs at least one particle".into()));
        }
        if self.positions.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.positions.len(),
                got: self.weights.len(),
            });
        }
        if !self.positions.is_finite() || !self.weights.iter().all(|w| w.is_finite()) {
            return Err(Error::NonFinite("ensemble".into()));
        }
        if self.weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidInput("negative particle weight".into()));
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidInput(format!("weights sum to {mass}, not 1")));
        }
        Ok(())
    }

    pub fn snapshot(&self) -> EnsembleSnapshot {
        EnsembleSnapshot {
            dim: self.dim(),
            positions: self.positions.rows().map(<[f64]>::to_vec).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Serializable copy of an [`Ensemble`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSnapshot {
    pub dim: usize,
    pub positions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let p = Points::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(Ensemble::new(p.clone(), vec![0.5, 0.6]).is_err());
        assert!(Ensemble::new(p.clone(), vec![1.5, -0.5]).is_err());
        assert!(Ensemble::new(p.clone(), vec![1.0]).is_err());
        let e = Ensemble::uniform(p).unwrap();
        assert_eq!(e.weights, vec![0.5, 0.5]);
    }
}
