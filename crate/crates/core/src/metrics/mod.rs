//! Evaluation metrics: exact 2-Wasserstein distance between weighted discrete
//! measures, squared kernel Stein discrepancy and mixture mass allocation.

mod brute;
mod ot;

pub use brute::w2_bruteforce;
pub use ot::{w2_exact, TransportPlan, MAX_OT_CELLS};

use crate::ensemble::{Ensemble, MASS_TOLERANCE};
use crate::error::{Error, Result};
use crate::kernels::{check_bandwidth, median_bandwidth, stein_kernel_from_scores};
use crate::points::Points;
use crate::targets::{GaussianMixtureTarget, Target};

/// `Σ m_i δ_{y_i}` with masses on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub atoms: Points,
    pub masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Points, masses: Vec<f64>) -> Result<Self> {
        if atoms.len() != masses.len() {
            return Err(Error::DimensionMismatch { expected: atoms.len(), got: masses.len() });
        }
        if atoms.is_empty() {
            return Err(Error::InvalidInput("measure needs at least one atom".into()));
        }
        if !atoms.is_finite() {
            return Err(Error::NonFinite("measure atoms".into()));
        }
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidInput("measure masses must be finite and non-negative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidInput(format!("measure masses sum to {total}, not 1")));
        }
        Ok(Self { atoms, masses })
    }

    pub fn uniform(atoms: Points) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms.dim()
    }
}

impl From<&Ensemble> for DiscreteMeasure {
    fn from(e: &Ensemble) -> Self {
        Self { atoms: e.positions.clone(), masses: e.weights.clone() }
    }
}

/// `KSD² = Σ_ij m_i m_j k_π(y_i, y_j)`, clamped at zero.
pub fn ksd_squared(target: &dyn Target, measure: &DiscreteMeasure, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    let atoms = &measure.atoms;
    let scores = atoms.rows().map(|x| target.score(x)).collect::<Result<Vec<_>>>()?;
    let n = measure.len();
    let mut total = 0.0;
    for i in 0..n {
        let mi = measure.masses[i];
        let mut row = 0.0;
        for j in 0..n {
            let k = stein_kernel_from_scores(atoms.row(i), &scores[i], atoms.row(j), &scores[j], None, h);
            row += measure.masses[j] * k.value;
        }
        total += mi * row;
    }
    Ok(total.max(0.0))
}

/// KSD² with a fixed bandwidth, or the median heuristic on the measure's atoms
/// when `h` is `None`. Returns the value and the bandwidth used.
pub fn ksd_squared_with_policy(
    target: &dyn Target,
    measure: &DiscreteMeasure,
    h: Option<f64>,
) -> Result<(f64, f64)> {
    let h = match h {
        Some(h) => h,
        None if measure.len() >= 2 => median_bandwidth(&measure.atoms)?,
        None => 1.0,
    };
    Ok((ksd_squared(target, measure, h)?, h))
}

/// Mass of `measure` assigned to each mixture component, each atom going to
/// its maximum-responsibility component.
pub fn component_mass(mixture: &GaussianMixtureTarget, measure: &DiscreteMeasure) -> Result<Vec<f64>> {
    let mut out = vec![0.0; mixture.components().len()];
    for (x, m) in measure.atoms.rows().zip(&measure.masses) {
        let resp = mixture.responsibilities(x)?;
        let best = resp
            .iter()
            .enumerate()
            .fold(0, |best, (j, r)| if *r > resp[best] { j } else { best });
        out[best] += m;
    }
    Ok(out)
}
