//! Finite-particle approximations of the first variation `U_μ̃` and the
//! velocity field `v_μ̃ = −∇U_μ̃` for each algorithm family.
//!
//! Self-interaction terms are kept in every sum, and every `Σ a_i K(x, x_i)`
//! is accumulated in log space.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::kernels::{check_bandwidth, stein_kernel_from_scores};
use crate::points::{log_sum_exp, sq_dist, Points};
use crate::targets::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "SVGD")]
    Svgd,
    #[serde(rename = "GFSD")]
    Gfsd,
    #[serde(rename = "Blob")]
    Blob,
    #[serde(rename = "KSDD")]
    Ksdd,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Svgd => "SVGD",
            Family::Gfsd => "GFSD",
            Family::Blob => "Blob",
            Family::Ksdd => "KSDD",
        }
    }

    /// SVGD has a velocity but no first variation.
    pub fn has_first_variation(self) -> bool {
        self != Family::Svgd
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SVGD" => Ok(Family::Svgd),
            "GFSD" => Ok(Family::Gfsd),
            "BLOB" => Ok(Family::Blob),
            "KSDD" => Ok(Family::Ksdd),
            _ => Err(Error::InvalidInput(format!("unknown family {s:?}"))),
        }
    }
}

/// Field approximation built on a frozen set of weighted anchors.
pub struct FieldApproximation<'a> {
    family: Family,
    target: &'a dyn Target,
    anchors: &'a Points,
    log_weights: Vec<f64>,
    weights: &'a [f64],
    h: f64,
    anchor_scores: Option<Vec<Vec<f64>>>,
    /// Blob: `log Σ_l a_l K(x_i, x_l)` per anchor.
    blob_log_denoms: Option<Vec<f64>>,
}

impl fmt::Debug for FieldApproximation<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldApproximation")
            .field("family", &self.family)
            .field("anchors", &self.anchors.len())
            .field("h", &self.h)
            .finish()
    }
}

impl<'a> FieldApproximation<'a> {
    pub fn new(
        family: Family,
        target: &'a dyn Target,
        anchors: &'a Points,
        weights: &'a [f64],
        h: f64,
    ) -> Result<Self> {
        check_bandwidth(h)?;
        if anchors.len() != weights.len() || anchors.is_empty() {
            return Err(Error::DimensionMismatch { expected: anchors.len(), got: weights.len() });
        }
        if anchors.dim() != target.dim() {
            return Err(Error::DimensionMismatch { expected: target.dim(), got: anchors.dim() });
        }
        let log_weights = weights.iter().map(|a| a.ln()).collect();
        let mut this = Self {
            family,
            target,
            anchors,
            log_weights,
            weights,
            h,
            anchor_scores: None,
            blob_log_denoms: None,
        };
        match family {
            Family::Svgd | Family::Ksdd => {
                this.anchor_scores = Some(this.compute_anchor_scores()?);
            }
            Family::Blob => {
                let denoms = anchors
                    .rows()
                    .map(|xi| this.log_smoothed_density(xi))
                    .collect::<Vec<_>>();
                this.blob_log_denoms = Some(denoms);
            }
            Family::Gfsd => {}
        }
        Ok(this)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    fn compute_anchor_scores(&self) -> Result<Vec<Vec<f64>>> {
        self.anchors.rows().map(|x| self.target.score(x)).collect()
    }

    fn log_kernel_terms(&self, x: &[f64]) -> Vec<f64> {
        let two_h2 = 2.0 * self.h * self.h;
        self.anchors
            .rows()
            .zip(&self.log_weights)
            .map(|(xi, lw)| lw - sq_dist(x, xi) / two_h2)
            .collect()
    }

    /// `log Σ a_i K(x, x_i)`.
    fn log_smoothed_density(&self, x: &[f64]) -> f64 {
        log_sum_exp(&self.log_kernel_terms(x))
    }

    /// `Σ a_i ∇_x K(x, x_i) / Σ a_i K(x, x_i)`.
    fn smoothed_log_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let terms = self.log_kernel_terms(x);
        let lse = log_sum_exp(&terms);
        if !lse.is_finite() {
            return Err(Error::DegenerateDensity { query: x.to_vec() });
        }
        let h2 = self.h * self.h;
        let mut out = vec![0.0; x.len()];
        for (xi, t) in self.anchors.rows().zip(&terms) {
            let w = (t - lse).exp();
            for k in 0..x.len() {
                out[k] -= w * (x[k] - xi[k]) / h2;
            }
        }
        Ok(out)
    }

    /// Blob extra term `Σ_i a_i ∇_x K(x, x_i) / Σ_l a_l K(x_i, x_l)` and its
    /// potential `Σ_i a_i K(x, x_i) / Σ_l a_l K(x_i, x_l)`.
    fn blob_extra(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let denoms = self.blob_log_denoms.as_ref().expect("blob caches denominators");
        let two_h2 = 2.0 * self.h * self.h;
        let h2 = self.h * self.h;
        let mut potential = 0.0;
        let mut grad = vec![0.0; x.len()];
        for ((xi, lw), ld) in self.anchors.rows().zip(&self.log_weights).zip(denoms) {
            let term = (lw - sq_dist(x, xi) / two_h2 - ld).exp();
            potential += term;
            for k in 0..x.len() {
                grad[k] -= term * (x[k] - xi[k]) / h2;
            }
        }
        (potential, grad)
    }

    fn velocity_given(&self, x: &[f64], score_x: &[f64], jac_x: Option<&DMatrix<f64>>) -> Result<Vec<f64>> {
        let d = x.len();
        match self.family {
            Family::Gfsd | Family::Blob => {
                let smooth = self.smoothed_log_gradient(x)?;
                let mut v: Vec<f64> = score_x.iter().zip(&smooth).map(|(s, g)| s - g).collect();
                if self.family == Family::Blob {
                    let (_, extra) = self.blob_extra(x);
                    for k in 0..d {
                        v[k] -= extra[k];
                    }
                }
                Ok(v)
            }
            Family::Svgd => {
                let scores = self.anchor_scores.as_ref().expect("svgd caches scores");
                let h2 = self.h * self.h;
                let mut v = vec![0.0; d];
                for ((xi, si), a) in self.anchors.rows().zip(scores).zip(self.weights) {
                    let k = (-sq_dist(xi, x) / (2.0 * h2)).exp();
                    for c in 0..d {
                        v[c] += a * (k * si[c] - (xi[c] - x[c]) / h2 * k);
                    }
                }
                Ok(v)
            }
            Family::Ksdd => {
                let scores = self.anchor_scores.as_ref().expect("ksdd caches scores");
                let jac = jac_x.expect("ksdd velocity needs the score jacobian");
                let mut v = vec![0.0; d];
                for ((xi, si), a) in self.anchors.rows().zip(scores).zip(self.weights) {
                    let eval = stein_kernel_from_scores(xi, si, x, score_x, Some(jac), self.h);
                    for c in 0..d {
                        v[c] -= a * eval.grad_second_arg[c];
                    }
                }
                Ok(v)
            }
        }
    }

    pub fn velocity_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let score = self.target.score(x)?;
        let jac = match self.family {
            Family::Ksdd => Some(self.target.score_jacobian(x)?),
            _ => None,
        };
        self.velocity_given(x, &score, jac.as_ref())
    }

    /// Velocities at the anchors themselves, reusing cached anchor scores.
    pub fn velocities_at_anchors(&self) -> Result<Points> {
        let owned;
        let scores = match &self.anchor_scores {
            Some(s) => s,
            None => {
                owned = self.compute_anchor_scores()?;
                &owned
            }
        };
        let mut out = Points::zeros(self.anchors.len(), self.anchors.dim());
        for (i, (x, s)) in self.anchors.rows().zip(scores).enumerate() {
            let jac = match self.family {
                Family::Ksdd => Some(self.target.score_jacobian(x)?),
                _ => None,
            };
            out.row_mut(i).copy_from_slice(&self.velocity_given(x, s, jac.as_ref())?);
        }
        Ok(out)
    }

    pub fn first_variation_at(&self, x: &[f64]) -> Result<f64> {
        match self.family {
            Family::Svgd => Err(Error::Unsupported("SVGD has no first variation".into())),
            Family::Gfsd | Family::Blob => {
                let log_smooth = self.log_smoothed_density(x);
                if !log_smooth.is_finite() {
                    return Err(Error::DegenerateDensity { query: x.to_vec() });
                }
                let mut u = -self.target.log_density(x)? + log_smooth;
                if self.family == Family::Blob {
                    u += self.blob_extra(x).0;
                }
                Ok(u)
            }
            Family::Ksdd => {
                let score = self.target.score(x)?;
                Ok(self.ksdd_potential(x, &score))
            }
        }
    }

    fn ksdd_potential(&self, x: &[f64], score_x: &[f64]) -> f64 {
        let scores = self.anchor_scores.as_ref().expect("ksdd caches scores");
        self.anchors
            .rows()
            .zip(scores)
            .zip(self.weights)
            .map(|((xi, si), a)| a * stein_kernel_from_scores(xi, si, x, score_x, None, self.h).value)
            .sum()
    }

    /// First variation at the anchors themselves.
    pub fn first_variations_at_anchors(&self) -> Result<Vec<f64>> {
        match (self.family, &self.anchor_scores) {
            (Family::Ksdd, Some(scores)) => Ok(self
                .anchors
                .rows()
                .zip(scores)
                .map(|(x, s)| self.ksdd_potential(x, s))
                .collect()),
            _ => self.anchors.rows().map(|x| self.first_variation_at(x)).collect(),
        }
    }
}

/// Velocity `v_μ̃` at each query point.
pub fn velocity(
    family: Family,
    target: &dyn Target,
    ensemble: &Ensemble,
    queries: &Points,
    h: f64,
) -> Result<Points> {
    let field = FieldApproximation::new(family, target, &ensemble.positions, &ensemble.weights, h)?;
    let mut out = Points::zeros(queries.len(), queries.dim());
    for (q, x) in queries.rows().enumerate() {
        out.row_mut(q).copy_from_slice(&field.velocity_at(x)?);
    }
    Ok(out)
}

/// First variation `U_μ̃` at each query point, with the measure given by
/// `weights` on `anchors`.
pub fn first_variation(
    family: Family,
    target: &dyn Target,
    weights: &[f64],
    anchors: &Points,
    queries: &Points,
    h: f64,
) -> Result<Vec<f64>> {
    if !family.has_first_variation() {
        return Err(Error::Unsupported("SVGD has no first variation".into()));
    }
    let field = FieldApproximation::new(family, target, anchors, weights, h)?;
    queries.rows().map(|x| field.first_variation_at(x)).collect()
}

/// Particle estimates of the two dissipation terms of the composite flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    /// `Σ a_i ‖∇U(x_i)‖²`
    pub transport: f64,
    /// Weighted variance of `U(x_i)`.
    pub reaction: f64,
}

pub fn dissipation_estimate(
    family: Family,
    target: &dyn Target,
    ensemble: &Ensemble,
    h: f64,
) -> Result<Dissipation> {
    if !family.has_first_variation() {
        return Err(Error::Unsupported("SVGD has no first variation".into()));
    }
    let field = FieldApproximation::new(family, target, &ensemble.positions, &ensemble.weights, h)?;
    let v = field.velocities_at_anchors()?;
    let u = field.first_variations_at_anchors()?;
    let transport = v
        .rows()
        .zip(&ensemble.weights)
        .map(|(vi, a)| a * vi.iter().map(|c| c * c).sum::<f64>())
        .sum();
    Ok(Dissipation { transport, reaction: weighted_variance(&ensemble.weights, &u) })
}

pub(crate) fn weighted_variance(weights: &[f64], values: &[f64]) -> f64 {
    let mean: f64 = weights.iter().zip(values).map(|(a, u)| a * u).sum();
    weights.iter().zip(values).map(|(a, u)| a * (u - mean).powi(2)).sum()
}
