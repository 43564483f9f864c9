use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::targets::Target;
use crate::variation::{Family, FieldApproximation};

/// `x_i ← x_i + η v_μ̃(x_i)`, with every velocity taken from the pre-step
/// ensemble.
pub fn position_step(
    ensemble: &Ensemble,
    family: Family,
    target: &dyn Target,
    eta: f64,
    h: f64,
) -> Result<Ensemble> {
    let field = FieldApproximation::new(family, target, &ensemble.positions, &ensemble.weights, h)?;
    let velocities = field.velocities_at_anchors()?;
    let mut positions = ensemble.positions.clone();
    for i in 0..ensemble.len() {
        let v = velocities.row(i);
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFiniteVelocity { particle: i });
        }
        for (x, vc) in positions.row_mut(i).iter_mut().zip(v) {
            *x += eta * vc;
        }
    }
    Ok(Ensemble { positions, weights: ensemble.weights.clone() })
}

/// Result of a continuous weight adjustment.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightUpdate {
    pub ensemble: Ensemble,
    /// `λη · max|Ū| ≥ 1`: the Euler step overshot and the floor may have
    /// been applied.
    pub overshoot: bool,
}

/// Centered first variation scaled into duplicate/kill rates,
/// `R_i = −rate · (U_i − Σ_j a_j U_j)`.
pub fn centered_rates(weights: &[f64], values: &[f64], rate: f64) -> Vec<f64> {
    let mean: f64 = weights.iter().zip(values).map(|(a, u)| a * u).sum();
    values.iter().map(|u| -rate * (u - mean)).collect()
}

/// One Euler step `a_i ← a_i − rate · Ū_i · a_i` followed by the positivity
/// safeguard (clip at `floor`, renormalize). Returns the new weights and
/// whether the step overshot.
pub fn reweight(weights: &[f64], values: &[f64], rate: f64, floor: f64) -> (Vec<f64>, bool) {
    let rates = centered_rates(weights, values, rate);
    let overshoot = rates.iter().any(|r| r.abs() >= 1.0);
    let next: Vec<f64> = weights.iter().zip(&rates).map(|(a, r)| a + r * a).collect();
    (apply_floor(next, floor), overshoot)
}

/// Normalizes to unit mass with every entry at least `floor`: entries that
/// would fall below are pinned to `floor` and the remainder is rescaled.
fn apply_floor(mut w: Vec<f64>, floor: f64) -> Vec<f64> {
    let mut pinned = vec![false; w.len()];
    loop {
        let free_mass: f64 = w.iter().zip(&pinned).filter(|(_, p)| !**p).map(|(a, _)| a.max(0.0)).sum();
        let budget = 1.0 - floor * pinned.iter().filter(|p| **p).count() as f64;
        let scale = if free_mass > 0.0 { budget / free_mass } else { 0.0 };
        let mut changed = false;
        for (a, p) in w.iter().zip(pinned.iter_mut()) {
            if !*p && a.max(0.0) * scale < floor {
                *p = true;
                changed = true;
            }
        }
        if !changed {
            for (a, p) in w.iter_mut().zip(&pinned) {
                *a = if *p { floor } else { *a * scale };
            }
            return w;
        }
    }
}

/// Continuous weight adjustment evaluated at `μ̃_{k+1/2}`: the post-step
/// positions carried by `ensemble_after_positions` with its pre-step weights.
pub fn ca_weight_step(
    ensemble_after_positions: &Ensemble,
    family: Family,
    target: &dyn Target,
    eta: f64,
    lambda: f64,
    h: f64,
    weight_floor: f64,
) -> Result<WeightUpdate> {
    let e = ensemble_after_positions;
    let field = FieldApproximation::new(family, target, &e.positions, &e.weights, h)?;
    let u = field.first_variations_at_anchors()?;
    let (weights, overshoot) = reweight(&e.weights, &u, lambda * eta, weight_floor);
    if overshoot {
        log::warn!("weight step overshoot: lambda*eta*max|U_bar| >= 1");
    }
    Ok(WeightUpdate { ensemble: Ensemble { positions: e.positions.clone(), weights }, overshoot })
}

/// Whether an exponential clock with rate `|rate|` rings within one step,
/// i.e. a Bernoulli draw with probability `1 − exp(−|rate|)`.
pub fn dk_event_fires<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> bool {
    if rate == 0.0 {
        return false;
    }
    let p = -(-rate.abs()).exp_m1();
    rng.random::<f64>() < p
}

/// Duplicate/kill step on an equally weighted ensemble. Particles with a
/// positive rate may be duplicated (replacing a uniformly chosen other
/// particle); particles with a negative rate may be killed (replaced by a copy
/// of a uniformly chosen other particle). Copies receive `N(0, noise_scale·η)`
/// noise per coordinate.
#[allow(clippy::too_many_arguments)]
pub fn dk_step<R: Rng + ?Sized>(
    ensemble_after_positions: &Ensemble,
    family: Family,
    target: &dyn Target,
    eta: f64,
    lambda: f64,
    h: f64,
    noise_scale: f64,
    rng: &mut R,
) -> Result<Ensemble> {
    let e = ensemble_after_positions;
    let m = e.len();
    let uniform = 1.0 / m as f64;
    if e.weights.iter().any(|w| (w - uniform).abs() > 1e-12) {
        return Err(Error::InvalidInput("duplicate/kill requires uniform weights".into()));
    }
    if lambda == 0.0 {
        return Ok(e.clone());
    }
    let field = FieldApproximation::new(family, target, &e.positions, &e.weights, h)?;
    let u = field.first_variations_at_anchors()?;
    let rates = centered_rates(&e.weights, &u, lambda * eta);
    let sd = (noise_scale * eta).sqrt();

    let mut positions = e.positions.clone();
    for (i, &r) in rates.iter().enumerate() {
        if !dk_event_fires(r, rng) || m == 1 {
            continue;
        }
        let pick = rng.random_range(0..m - 1);
        let other = if pick >= i { pick + 1 } else { pick };
        let (src, dst) = if r > 0.0 { (i, other) } else { (other, i) };
        positions.copy_row(src, dst);
        for x in positions.row_mut(dst) {
            let z: f64 = StandardNormal.sample(rng);
            *x += sd * z;
        }
    }
    Ok(Ensemble { positions, weights: e.weights.clone() })
}

/// Unadjusted Langevin step `x ← x + η s(x) + √(2η) ξ`.
pub fn langevin_step<R: Rng + ?Sized>(
    ensemble: &Ensemble,
    target: &dyn Target,
    eta: f64,
    rng: &mut R,
) -> Result<Ensemble> {
    let sd = (2.0 * eta).sqrt();
    let mut positions = ensemble.positions.clone();
    for i in 0..ensemble.len() {
        let s = target.score(ensemble.positions.row(i))?;
        for (x, sc) in positions.row_mut(i).iter_mut().zip(&s) {
            let z: f64 = StandardNormal.sample(rng);
            *x += eta * sc + sd * z;
        }
    }
    Ok(Ensemble { positions, weights: ensemble.weights.clone() })
}
