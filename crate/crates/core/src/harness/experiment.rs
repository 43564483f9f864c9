use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, MetricKind, TargetConfig};
use crate::engine::{run, AlgorithmSpec, RunOptions, TraceEntry};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::metrics::{component_mass, ksd_squared_with_policy, w2_exact, DiscreteMeasure};
use crate::points::Points;
use crate::targets::{
    grid_reference, load_lidar_csv, sample_reference, synthetic_lidar, GaussianMixtureTarget,
    GaussianTarget, GpRegressionTarget, GridBounds, MixtureComponent, Target,
};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "DPVI_THREADS";

const REFERENCE_STREAM: u64 = 0x5245_4645_5245_4e43;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one run. Injective in `(algorithm, particles, repeat)` for a fixed
/// global seed: the triple is bit-packed (20/24/20 bits) and passed through
/// two bijective mixers.
pub fn child_seed(global: u64, algorithm: usize, particles: usize, repeat: usize) -> u64 {
    let key = ((algorithm as u64) << 44) | ((particles as u64) << 20) | repeat as u64;
    splitmix64(global.wrapping_add(splitmix64(key)))
}

pub fn thread_cap_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|n: &usize| *n > 0)
}

/// Target built from a config, with the mixture kept for mass diagnostics.
#[derive(Debug)]
pub struct PreparedTarget {
    pub target: Box<dyn Target>,
    pub mixture: Option<GaussianMixtureTarget>,
    pub description: serde_json::Value,
}

impl PreparedTarget {
    pub fn from_config(cfg: &TargetConfig) -> Result<Self> {
        match cfg {
            TargetConfig::Gaussian { mean, covariance } => {
                let cov = TargetConfig::matrix(covariance, "target")?;
                let t = GaussianTarget::new(mean.clone(), cov)?;
                Ok(Self {
                    description: json!({"kind": "gaussian", "mean": mean, "covariance": covariance}),
                    target: Box::new(t),
                    mixture: None,
                })
            }
            TargetConfig::Gmm { components } => {
                let mix = match components {
                    None => GaussianMixtureTarget::default_planar(),
                    Some(list) => GaussianMixtureTarget::new(
                        list.iter()
                            .map(|c| {
                                let cov = TargetConfig::matrix(&c.covariance, "target.components")?;
                                Ok(MixtureComponent {
                                    weight: c.weight,
                                    gaussian: GaussianTarget::new(c.mean.clone(), cov)?,
                                })
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )?,
                };
                let described: Vec<_> = mix
                    .components()
                    .iter()
                    .map(|c| {
                        let cov = c.gaussian.covariance();
                        json!({
                            "weight": c.weight,
                            "mean": c.gaussian.mean().as_slice(),
                            "covariance": (0..cov.nrows())
                                .map(|i| (0..cov.ncols()).map(|j| cov[(i, j)]).collect::<Vec<_>>())
                                .collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                Ok(Self {
                    description: json!({"kind": "gmm", "components": described}),
                    target: Box::new(mix.clone()),
                    mixture: Some(mix),
                })
            }
            TargetConfig::Gp {
                dataset,
                synthetic_size,
                synthetic_seed,
                noise_variance,
                prior,
                standardize,
            } => {
                let data = match dataset {
                    Some(path) => load_lidar_csv(path)?,
                    None => synthetic_lidar(*synthetic_size, *synthetic_seed),
                };
                let n = data.x.len();
                let data = if *standardize { data.standardized_inputs() } else { data };
                let t = GpRegressionTarget::new(data.x, data.y, *noise_variance, *prior)?;
                Ok(Self {
                    description: json!({
                        "kind": "gp",
                        "dataset": dataset.as_ref().map(|p| p.display().to_string()),
                        "observations": n,
                        "synthetic_seed": dataset.is_none().then_some(*synthetic_seed),
                        "noise_variance": noise_variance,
                        "prior": prior,
                        "standardize": standardize,
                    }),
                    target: Box::new(t),
                    mixture: None,
                })
            }
        }
    }
}

/// Coarse scan of `[-10, 10]²` for the region within `e^-30` of the best
/// coarse cell, padded by two coarse cells.
fn locate_grid_bounds(target: &dyn Target) -> Result<GridBounds> {
    const HALF: f64 = 10.0;
    const RES: usize = 81;
    let step = 2.0 * HALF / (RES - 1) as f64;
    let mut values = Vec::with_capacity(RES * RES);
    for i in 0..RES {
        for j in 0..RES {
            let p = [-HALF + i as f64 * step, -HALF + j as f64 * step];
            values.push(target.log_density(&p).unwrap_or(f64::NEG_INFINITY));
        }
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::InvalidInput("could not locate posterior mass for the grid reference".into()));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for i in 0..RES {
        for j in 0..RES {
            if values[i * RES + j] > max - 30.0 {
                let p = [-HALF + i as f64 * step, -HALF + j as f64 * step];
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
    }
    Ok(GridBounds { x: (lo[0] - 2.0 * step, hi[0] + 2.0 * step), y: (lo[1] - 2.0 * step, hi[1] + 2.0 * step) })
}

fn build_reference(config: &ExperimentConfig, prepared: &PreparedTarget) -> Result<(Points, serde_json::Value)> {
    let n = config.reference_samples();
    let seed = splitmix64(config.seed ^ REFERENCE_STREAM);
    match sample_reference(prepared.target.as_ref(), n, seed) {
        Ok(points) => Ok((points, json!({"method": "exact", "samples": n, "seed": seed}))),
        Err(Error::Unsupported(_)) => {
            let bounds = match config.reference.grid_bounds {
                Some(b) => b,
                None => locate_grid_bounds(prepared.target.as_ref())?,
            };
            let res = config.reference.grid_resolution;
            let points = grid_reference(prepared.target.as_ref(), bounds, res, n, seed)?;
            Ok((
                points,
                json!({"method": "grid", "samples": n, "seed": seed, "resolution": res, "bounds": bounds}),
            ))
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub algorithm: String,
    pub particles: usize,
    pub repeat: usize,
    pub metric: String,
    pub value: Option<f64>,
    /// Kernel bandwidth the metric was computed with (KSD only).
    pub bandwidth: Option<f64>,
    pub seed: u64,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub particles: usize,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    /// Mean and sample standard deviation per (algorithm, M, metric), in
    /// first-appearance order. Error rows are excluded.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut groups: Vec<((String, usize, String), Vec<f64>)> = Vec::new();
        for r in &self.rows {
            let Some(v) = r.value else { continue };
            let key = (r.algorithm.clone(), r.particles, r.metric.clone());
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, vals)) => vals.push(v),
                None => groups.push((key, vec![v])),
            }
        }
        groups
            .into_iter()
            .map(|((algorithm, particles, metric), vals)| {
                let n = vals.len();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let std = if n > 1 {
                    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                SummaryRow { algorithm, particles, metric, mean, std, count: n }
            })
            .collect()
    }

    pub fn mean(&self, algorithm: &str, particles: usize, metric: &str) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.algorithm == algorithm && s.particles == particles && s.metric == metric)
            .map(|s| s.mean)
    }

    pub fn errors(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

/// Final state of one run.
#[derive(Debug, Clone)]
pub struct RunSnapshot {
    pub algorithm: String,
    pub algorithm_index: usize,
    pub particles: usize,
    pub repeat: usize,
    pub seed: u64,
    pub ensemble: Option<Ensemble>,
    pub trace: Vec<TraceEntry>,
    pub wall_time_secs: f64,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub table: ResultsTable,
    pub runs: Vec<RunSnapshot>,
    pub reference: Points,
    pub target: PreparedTarget,
    pub reference_meta: serde_json::Value,
    pub specs: Vec<AlgorithmSpec>,
}

/// Evaluates the configured metrics of `ensemble` against `reference`. KSD
/// contributes `ksd_squared` and the `ksd_bandwidth` it used; component mass
/// contributes one `mass_c<j>` entry per component.
pub fn evaluate_metrics(
    prepared: &PreparedTarget,
    reference: &DiscreteMeasure,
    ensemble: &Ensemble,
    metrics: &[MetricKind],
    ksd_bandwidth: Option<f64>,
) -> Result<Vec<(String, f64)>> {
    let measure = DiscreteMeasure::from(ensemble);
    let mut out = Vec::new();
    for m in metrics {
        match m {
            MetricKind::W2 => out.push(("w2".into(), w2_exact(&measure, reference)?.0)),
            MetricKind::Ksd => {
                let (v, h) = ksd_squared_with_policy(prepared.target.as_ref(), &measure, ksd_bandwidth)?;
                out.push(("ksd_squared".into(), v));
                out.push(("ksd_bandwidth".into(), h));
            }
            MetricKind::ComponentMass => {
                let mix = prepared
                    .mixture
                    .as_ref()
                    .ok_or_else(|| Error::Unsupported("component_mass needs a mixture target".into()))?;
                for (j, mass) in component_mass(mix, &measure)?.into_iter().enumerate() {
                    out.push((format!("mass_c{j}"), mass));
                }
            }
        }
    }
    Ok(out)
}

fn initial_ensemble(config: &ExperimentConfig, dim: usize, particles: usize, seed: u64) -> Result<Ensemble> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mean = config.init.mean.clone().unwrap_or_else(|| vec![0.0; dim]);
    if mean.len() != dim {
        return Err(Error::Config(format!("init.mean: expected {dim} entries, got {}", mean.len())));
    }
    let sd = config.init.std.unwrap_or(1.0);
    let mut positions = Points::zeros(particles, dim);
    for i in 0..particles {
        for (x, mu) in positions.row_mut(i).iter_mut().zip(&mean) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x = mu + sd * z;
        }
    }
    Ensemble::uniform(positions)
}

struct Job {
    algorithm_index: usize,
    spec: AlgorithmSpec,
    particles: usize,
    repeat: usize,
    seed: u64,
}

/// Runs every (algorithm, M, repeat) combination. Runs execute on a worker
/// pool of `jobs` threads (capped by [`THREADS_ENV`]); rows come back sorted
/// by algorithm index, M and repeat regardless of scheduling. A failed run
/// yields an error row and the sweep continues.
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentResult> {
    config.validate()?;
    let specs = config.resolved_algorithms()?;
    let prepared = PreparedTarget::from_config(&config.target)?;
    let (reference, reference_meta) = build_reference(config, &prepared)?;
    let reference_measure = DiscreteMeasure::uniform(reference.clone())?;
    let dim = prepared.target.dim();

    let mut work = Vec::new();
    for (a, spec) in specs.iter().enumerate() {
        for &m in &config.particle_counts {
            for r in 0..config.repeats {
                let seed = child_seed(config.seed, a, m, r);
                work.push(Job {
                    algorithm_index: a,
                    spec: AlgorithmSpec { seed, ..spec.clone() },
                    particles: m,
                    repeat: r,
                    seed,
                });
            }
        }
    }

    let threads = match (jobs, thread_cap_from_env()) {
        (Some(j), Some(cap)) => j.min(cap),
        (Some(j), None) => j,
        (None, Some(cap)) => cap,
        (None, None) => rayon::current_num_threads(),
    }
    .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;

    let execute = |job: &Job| -> (RunSnapshot, Vec<ResultRow>) {
        let label = job.spec.label();
        let outcome = initial_ensemble(config, dim, job.particles, job.seed).and_then(|init| {
            let mut options = RunOptions::every(config.log_every);
            let record = run(&job.spec, prepared.target.as_ref(), &init, &mut options)?;
            let metrics = evaluate_metrics(
                &prepared,
                &reference_measure,
                &record.final_ensemble,
                &config.metrics,
                config.ksd_bandwidth,
            )?;
            Ok((record, metrics))
        });
        let row = |metric: String, value: Option<f64>, wall: f64, error: Option<String>| ResultRow {
            algorithm: label.clone(),
            particles: job.particles,
            repeat: job.repeat,
            metric,
            value,
            bandwidth: None,
            seed: job.seed,
            wall_time_s: wall,
            error,
        };
        match outcome {
            Ok((record, metrics)) => {
                let wall = record.wall_time_secs;
                let mut rows: Vec<ResultRow> = Vec::new();
                for (name, v) in metrics {
                    match (name.as_str(), rows.last_mut()) {
                        ("ksd_bandwidth", Some(last)) => last.bandwidth = Some(v),
                        _ => rows.push(row(name, Some(v), wall, None)),
                    }
                }
                let snap = RunSnapshot {
                    algorithm: label.clone(),
                    algorithm_index: job.algorithm_index,
                    particles: job.particles,
                    repeat: job.repeat,
                    seed: job.seed,
                    ensemble: Some(record.final_ensemble),
                    trace: record.trace,
                    wall_time_secs: wall,
                };
                (snap, rows)
            }
            Err(e) => {
                log::error!("{label} M={} repeat={} failed: {e}", job.particles, job.repeat);
                let snap = RunSnapshot {
                    algorithm: label.clone(),
                    algorithm_index: job.algorithm_index,
                    particles: job.particles,
                    repeat: job.repeat,
                    seed: job.seed,
                    ensemble: None,
                    trace: Vec::new(),
                    wall_time_secs: 0.0,
                };
                (snap, vec![row("error".into(), None, 0.0, Some(e.to_string()))])
            }
        }
    };
    let results: Vec<(RunSnapshot, Vec<ResultRow>)> = pool.install(|| work.par_iter().map(execute).collect());

    let mut table = ResultsTable::default();
    let mut runs = Vec::with_capacity(results.len());
    for (snap, rows) in results {
        table.rows.extend(rows);
        runs.push(snap);
    }
    Ok(ExperimentResult { table, runs, reference, target: prepared, reference_meta, specs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn child_seeds_are_injective() {
        let mut seen = HashSet::new();
        for a in 0..6 {
            for m in [1, 2, 5, 10, 20, 50, 100, 1 << 20] {
                for r in 0..40 {
                    assert!(seen.insert(child_seed(17, a, m, r)));
                }
            }
        }
    }

    #[test]
    fn summary_statistics() {
        let row = |v: Option<f64>| ResultRow {
            algorithm: "GFSD".into(),
            particles: 5,
            repeat: 0,
            metric: "w2".into(),
            value: v,
            bandwidth: None,
            seed: 0,
            wall_time_s: 0.0,
            error: None,
        };
        let table = ResultsTable { rows: vec![row(Some(1.0)), row(Some(3.0)), row(None)] };
        let s = table.summary();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean, 2.0);
        assert!((s[0].std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s[0].count, 2);
    }

    #[test]
    fn grid_bounds_cover_gaussian_mass() {
        let t = GaussianTarget::new(vec![1.0, -2.0], nalgebra::DMatrix::identity(2, 2) * 0.25).unwrap();
        let b = locate_grid_bounds(&t).unwrap();
        assert!(b.x.0 < -0.5 && b.x.1 > 2.5, "{b:?}");
        assert!(b.y.0 < -3.5 && b.y.1 > -0.5, "{b:?}");
    }
}
