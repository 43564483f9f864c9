use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::engine::{AlgorithmSpec, WeightStrategy};
use crate::error::{Error, Result};
use crate::kernels::KernelConfig;
use crate::targets::{GpPrior, GridBounds};
use crate::variation::Family;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
    /// Gaussian mixture; omitting `components` selects the default planar
    /// 1/3–2/3 mixture.
    Gmm {
        #[serde(default)]
        components: Option<Vec<ComponentConfig>>,
    },
    /// GP hyperparameter posterior on a CSV data set or the synthetic stand-in.
    Gp {
        #[serde(default)]
        dataset: Option<PathBuf>,
        #[serde(default = "default_synthetic_size")]
        synthetic_size: usize,
        #[serde(default)]
        synthetic_seed: u64,
        #[serde(default = "default_noise_variance")]
        noise_variance: f64,
        #[serde(default)]
        prior: GpPrior,
        #[serde(default = "default_true")]
        standardize: bool,
    },
}

fn default_synthetic_size() -> usize {
    221
}

fn default_noise_variance() -> f64 {
    0.04
}

fn default_true() -> bool {
    true
}

impl TargetConfig {
    pub fn is_gp(&self) -> bool {
        matches!(self, TargetConfig::Gp { .. })
    }

    pub(crate) fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Config(format!("{what}: covariance must be a square matrix")));
        }
        Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }
}

/// One algorithm of the sweep: a preset `name` (`"D-Blob-CA"`, `"BDLS"`, …)
/// or an explicit `family` / `weight_strategy` / `langevin` triple, plus
/// optional hyperparameter overrides.
///
/// In JSON an entry is either an object or just the preset name as a string.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, remote = "Self")]
pub struct AlgorithmEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_strategy: Option<WeightStrategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub langevin: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dk_noise_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
}

impl<'de> Deserialize<'de> for AlgorithmEntry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct Entry;
        impl<'de> serde::de::Visitor<'de> for Entry {
            type Value = AlgorithmEntry;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an algorithm name or an algorithm object")
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                Ok(AlgorithmEntry::preset(v))
            }

            fn visit_map<A: serde::de::MapAccess<'de>>(self, map: A) -> std::result::Result<Self::Value, A::Error> {
                AlgorithmEntry::deserialize(serde::de::value::MapAccessDeserializer::new(map))
            }
        }
        d.deserialize_any(Entry)
    }
}

impl Serialize for AlgorithmEntry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AlgorithmEntry::serialize(self, s)
    }
}

impl AlgorithmEntry {
    pub fn preset(name: &str) -> Self {
        Self { name: Some(name.into()), ..Self::default() }
    }

    /// Resolves the entry against the target's default hyperparameters. The
    /// run seed is filled in later per (algorithm, M, repeat).
    pub fn resolve(&self, default_eta: f64) -> Result<AlgorithmSpec> {
        let mut spec = match (&self.name, self.family) {
            (Some(name), _) => {
                let mut s = AlgorithmSpec::preset(name)?;
                if let Some(f) = self.family {
                    s.family = f;
                }
                if let Some(w) = self.weight_strategy {
                    s.weight_strategy = w;
                }
                s
            }
            (None, Some(family)) => {
                AlgorithmSpec::new(family, self.weight_strategy.unwrap_or(WeightStrategy::Fixed))
            }
            (None, None) => {
                return Err(Error::InvalidInput("either `name` or `family` is required".into()))
            }
        };
        if let Some(l) = self.langevin {
            spec.langevin = l;
        }
        spec.eta = self.eta.unwrap_or(default_eta);
        if let Some(v) = self.lambda {
            spec.lambda = v;
        }
        if let Some(v) = self.iterations {
            spec.iterations = v;
        }
        if let Some(v) = self.weight_floor {
            spec.weight_floor = v;
        }
        if let Some(v) = self.dk_noise_scale {
            spec.dk_noise_scale = v;
        }
        if let Some(k) = self.kernel {
            spec.kernel = k;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Reference sample size; defaults to 500 (exact samplers) or 2000 (grid).
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
    /// Grid box for targets without an exact sampler; located automatically
    /// when omitted.
    #[serde(default)]
    pub grid_bounds: Option<GridBounds>,
}

fn default_grid_resolution() -> usize {
    200
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { samples: None, grid_resolution: default_grid_resolution(), grid_bounds: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    /// Mean of the Gaussian the initial positions are drawn from (zero when
    /// omitted).
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
    /// Per-coordinate standard deviation (1 when omitted).
    #[serde(default)]
    pub std: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    W2,
    Ksd,
    /// Mixture targets only: mass on each component, reported as `mass_c<j>`.
    ComponentMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub target: TargetConfig,
    pub algorithms: Vec<AlgorithmEntry>,
    pub particle_counts: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricKind>,
    /// Trace cadence in iterations; 0 records only the first and last.
    #[serde(default)]
    pub log_every: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init: InitConfig,
    /// Fixed KSD bandwidth; the median heuristic on the evaluated atoms when
    /// omitted.
    #[serde(default)]
    pub ksd_bandwidth: Option<f64>,
    /// Write SVG scatter plots (2-D targets only).
    #[serde(default)]
    pub svg: bool,
}

fn default_repeats() -> usize {
    1
}

fn default_metrics() -> Vec<MetricKind> {
    vec![MetricKind::W2]
}

/// Child-seed packing limits.
pub(crate) const MAX_ALGORITHMS: usize = 1 << 20;
pub(crate) const MAX_PARTICLES: usize = 1 << 24;
pub(crate) const MAX_REPEATS: usize = 1 << 20;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("parse error at line {} column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default step size for the configured target.
    pub fn default_eta(&self) -> f64 {
        if self.target.is_gp() {
            0.01
        } else {
            0.05
        }
    }

    pub fn reference_samples(&self) -> usize {
        self.reference.samples.unwrap_or(if self.target.is_gp() { 2000 } else { 500 })
    }

    pub fn resolved_algorithms(&self) -> Result<Vec<AlgorithmSpec>> {
        let eta = self.default_eta();
        self.algorithms
            .iter()
            .enumerate()
            .map(|(i, a)| a.resolve(eta).map_err(|e| Error::Config(format!("algorithms[{i}]: {e}"))))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.repeats == 0 {
            return fail("repeats: must be at least 1".into());
        }
        if self.repeats > MAX_REPEATS {
            return fail(format!("repeats: at most {MAX_REPEATS}"));
        }
        if self.algorithms.is_empty() {
            return fail("algorithms: at least one algorithm is required".into());
        }
        if self.algorithms.len() > MAX_ALGORITHMS {
            return fail(format!("algorithms: at most {MAX_ALGORITHMS}"));
        }
        if self.particle_counts.is_empty() {
            return fail("particle_counts: at least one particle count is required".into());
        }
        if let Some(&m) = self.particle_counts.iter().find(|&&m| m == 0 || m >= MAX_PARTICLES) {
            return fail(format!("particle_counts: {m} is out of range"));
        }
        if self.metrics.is_empty() {
            return fail("metrics: at least one metric is required".into());
        }
        if self.metrics.contains(&MetricKind::ComponentMass)
            && !matches!(self.target, TargetConfig::Gmm { .. })
        {
            return fail("metrics: component_mass requires a gmm target".into());
        }
        if let Some(h) = self.ksd_bandwidth {
            if !(h > 0.0) {
                return fail("ksd_bandwidth: must be positive".into());
            }
        }
        if let Some(s) = self.init.std {
            if !(s > 0.0) || !s.is_finite() {
                return fail("init.std: must be positive".into());
            }
        }
        if self.reference.samples == Some(0) {
            return fail("reference.samples: must be at least 1".into());
        }
        if self.target.is_gp() && self.reference.grid_resolution < 50 {
            return fail("reference.grid_resolution: must be at least 50".into());
        }
        match &self.target {
            TargetConfig::Gp { synthetic_size, noise_variance, dataset, .. } => {
                if dataset.is_none() && *synthetic_size < 2 {
                    return fail("target.synthetic_size: must be at least 2".into());
                }
                if !(*noise_variance > 0.0) {
                    return fail("target.noise_variance: must be positive".into());
                }
            }
            TargetConfig::Gmm { components: Some(c) } if c.is_empty() => {
                return fail("target.components: at least one component is required".into());
            }
            _ => {}
        }
        self.resolved_algorithms()?;
        Ok(())
    }
}

/// Reads and validates a JSON experiment config.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_json(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
