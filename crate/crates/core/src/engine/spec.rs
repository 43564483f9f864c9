use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelConfig;
use crate::variation::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightStrategy {
    #[serde(rename = "fixed")]
    Fixed,
    /// Continuous adjustment: explicit Euler step of the reaction flow.
    #[serde(rename = "CA")]
    Ca,
    /// Duplicate/kill with exponential-clock rates; weights stay uniform.
    #[serde(rename = "DK")]
    Dk,
}

impl fmt::Display for WeightStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightStrategy::Fixed => "fixed",
            WeightStrategy::Ca => "CA",
            WeightStrategy::Dk => "DK",
        })
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub family: Family,
    pub weight_strategy: WeightStrategy,
    /// Step size.
    pub eta: f64,
    /// Weight-adjustment rate.
    pub lambda: f64,
    pub iterations: usize,
    pub seed: u64,
    pub weight_floor: f64,
    /// Per-coordinate variance of the noise added to duplicated particles,
    /// in units of `eta`.
    pub dk_noise_scale: f64,
    /// Move particles by unadjusted Langevin dynamics instead of the family's
    /// deterministic velocity.
    pub langevin: bool,
    pub kernel: KernelConfig,
}

impl AlgorithmSpec {
    pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-8;

    pub fn new(family: Family, weight_strategy: WeightStrategy) -> Self {
        Self {
            family,
            weight_strategy,
            eta: 0.05,
            lambda: 1.0,
            iterations: 2000,
            seed: 0,
            weight_floor: Self::DEFAULT_WEIGHT_FLOOR,
            dk_noise_scale: 1.0,
            langevin: false,
            kernel: KernelConfig::default(),
        }
    }

    /// Specs for the named algorithms: `SVGD`, `GFSD`, `Blob`, `KSDD`,
    /// `D-<family>-CA`, `D-<family>-DK`, `ULD` and `BDLS`.
    pub fn preset(name: &str) -> Result<Self> {
        let upper = name.to_ascii_uppercase();
        let spec = match upper.as_str() {
            "ULD" => Self { langevin: true, ..Self::new(Family::Gfsd, WeightStrategy::Fixed) },
            "BDLS" => Self { langevin: true, ..Self::new(Family::Gfsd, WeightStrategy::Dk) },
            _ => {
                if let Some(rest) = upper.strip_prefix("D-") {
                    let (fam, strat) = rest
                        .rsplit_once('-')
                        .ok_or_else(|| Error::InvalidInput(format!("unknown algorithm {name:?}")))?;
                    let strategy = match strat {
                        "CA" => WeightStrategy::Ca,
                        "DK" => WeightStrategy::Dk,
                        _ => return Err(Error::InvalidInput(format!("unknown algorithm {name:?}"))),
                    };
                    Self::new(fam.parse()?, strategy)
                } else {
                    Self::new(upper.parse()?, WeightStrategy::Fixed)
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Conventional display name, e.g. `D-Blob-CA`.
    pub fn label(&self) -> String {
        if self.langevin {
            return match self.weight_strategy {
                WeightStrategy::Fixed => "ULD".into(),
                WeightStrategy::Dk => "BDLS".into(),
                WeightStrategy::Ca => "ULD-CA".into(),
            };
        }
        match self.weight_strategy {
            WeightStrategy::Fixed => self.family.name().into(),
            s => format!("D-{}-{}", self.family.name(), s),
        }
    }

    /// Family whose first variation drives the weight dynamics.
    pub fn reaction_family(&self) -> Family {
        if self.langevin {
            Family::Gfsd
        } else {
            self.family
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidInput(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidInput(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidInput("iterations must be at least 1".into()));
        }
        if !(self.weight_floor >= 0.0) || self.weight_floor >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "weight_floor must lie in [0, 1), got {}",
                self.weight_floor
            )));
        }
        if !(self.dk_noise_scale >= 0.0) || !self.dk_noise_scale.is_finite() {
            return Err(Error::InvalidInput("dk_noise_scale must be non-negative".into()));
        }
        if self.langevin && self.family != Family::Gfsd {
            return Err(Error::InvalidInput(
                "Langevin baselines use the GFSD density estimate; set family to GFSD".into(),
            ));
        }
        if !self.langevin
            && self.family == Family::Svgd
            && self.weight_strategy != WeightStrategy::Fixed
        {
            return Err(Error::InvalidInput(format!(
                "SVGD has no first variation and cannot use the {} weight strategy",
                self.weight_strategy
            )));
        }
        self.kernel.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_labels() {
        for name in [
            "SVGD", "GFSD", "Blob", "KSDD", "D-GFSD-CA", "D-Blob-CA", "D-KSDD-CA", "D-GFSD-DK",
            "D-Blob-DK", "D-KSDD-DK", "ULD", "BDLS",
        ] {
            assert_eq!(AlgorithmSpec::preset(name).unwrap().label(), name);
        }
        assert!(AlgorithmSpec::preset("D-SVGD-CA").is_err());
        assert!(AlgorithmSpec::preset("D-GFSD-XX").is_err());
    }

    #[test]
    fn validation_rules() {
        let mut s = AlgorithmSpec::new(Family::Gfsd, WeightStrategy::Ca);
        assert!(s.validate().is_ok());
        s.eta = 0.0;
        assert!(s.validate().is_err());
        let s = AlgorithmSpec { lambda: -1.0, ..AlgorithmSpec::new(Family::Gfsd, WeightStrategy::Ca) };
        assert!(s.validate().is_err());
        let s = AlgorithmSpec { iterations: 0, ..AlgorithmSpec::new(Family::Gfsd, WeightStrategy::Ca) };
        assert!(s.validate().is_err());
        assert!(AlgorithmSpec::new(Family::Svgd, WeightStrategy::Dk).validate().is_err());
        let s = AlgorithmSpec { langevin: true, ..AlgorithmSpec::new(Family::Ksdd, WeightStrategy::Dk) };
        assert!(s.validate().is_err());
    }
}
