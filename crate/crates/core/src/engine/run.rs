use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::spec::{AlgorithmSpec, WeightStrategy};
use super::steps::{ca_weight_step, dk_step, langevin_step, position_step};
use crate::ensemble::{Ensemble, EnsembleSnapshot};
use crate::error::Result;
use crate::kernels::BandwidthPolicy;
use crate::targets::Target;

pub type MetricFn<'a> = Box<dyn FnMut(&Ensemble) -> Result<f64> + 'a>;

/// Named metric evaluated on the ensemble at logging points.
pub struct MetricHook<'a> {
    pub name: String,
    pub eval: MetricFn<'a>,
}

impl<'a> MetricHook<'a> {
    pub fn new(name: impl Into<String>, eval: impl FnMut(&Ensemble) -> Result<f64> + 'a) -> Self {
        Self { name: name.into(), eval: Box::new(eval) }
    }
}

/// Logging cadence and hooks. Entries are recorded at iteration 0, every
/// `log_every` iterations, and at the final iteration; `log_every == 0` keeps
/// only the first and last.
#[derive(Default)]
pub struct RunOptions<'a> {
    pub log_every: usize,
    pub hooks: Vec<MetricHook<'a>>,
}

impl<'a> RunOptions<'a> {
    pub fn every(log_every: usize) -> Self {
        Self { log_every, hooks: Vec::new() }
    }

    pub fn with_hook(
        mut self,
        name: impl Into<String>,
        eval: impl FnMut(&Ensemble) -> Result<f64> + 'a,
    ) -> Self {
        self.hooks.push(MetricHook::new(name, eval));
        self
    }

    fn logs_at(&self, iteration: usize, total: usize) -> bool {
        iteration == 0
            || iteration == total
            || (self.log_every > 0 && iteration.is_multiple_of(self.log_every))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub bandwidth: Option<f64>,
    pub metrics: Vec<(String, f64)>,
}

impl TraceEntry {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub label: String,
    pub spec: AlgorithmSpec,
    pub trace: Vec<TraceEntry>,
    #[serde(serialize_with = "serialize_ensemble")]
    pub final_ensemble: Ensemble,
    /// Iterations whose CA step overshot.
    pub overshoot_steps: usize,
    pub wall_time_secs: f64,
}

fn serialize_ensemble<S: serde::Serializer>(e: &Ensemble, s: S) -> std::result::Result<S::Ok, S::Error> {
    EnsembleSnapshot::serialize(&e.snapshot(), s)
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run record serializes")
    }
}

/// Runs `spec.iterations` steps: a position update (or Langevin move) for all
/// particles, then the weight update chosen by `spec.weight_strategy`.
pub fn run(
    spec: &AlgorithmSpec,
    target: &dyn Target,
    initial: &Ensemble,
    options: &mut RunOptions<'_>,
) -> Result<RunRecord> {
    spec.validate()?;
    initial.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut ensemble = initial.clone();
    let needs_kernel = !spec.langevin || spec.weight_strategy != WeightStrategy::Fixed;
    let total = spec.iterations;
    let mut trace = Vec::new();
    let mut overshoot_steps = 0;
    let mut h = if needs_kernel { Some(spec.kernel.bandwidth_for(&ensemble.positions)?) } else { None };

    record(&mut trace, options, 0, h, &ensemble)?;
    for k in 0..total {
        if needs_kernel
            && k > 0
            && spec.kernel.bandwidth == BandwidthPolicy::MedianHeuristic
            && k % spec.kernel.recompute_every == 0
        {
            h = Some(spec.kernel.bandwidth_for(&ensemble.positions).map_err(|e| e.at_iteration(k))?);
        }
        ensemble = step(spec, target, &ensemble, h, &mut rng, &mut overshoot_steps)
            .map_err(|e| e.at_iteration(k))?;
        if options.logs_at(k + 1, total) {
            record(&mut trace, options, k + 1, h, &ensemble).map_err(|e| e.at_iteration(k + 1))?;
        }
    }

    Ok(RunRecord {
        label: spec.label(),
        spec: spec.clone(),
        trace,
        final_ensemble: ensemble,
        overshoot_steps,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn step(
    spec: &AlgorithmSpec,
    target: &dyn Target,
    ensemble: &Ensemble,
    h: Option<f64>,
    rng: &mut ChaCha8Rng,
    overshoot_steps: &mut usize,
) -> Result<Ensemble> {
    let moved = if spec.langevin {
        langevin_step(ensemble, target, spec.eta, rng)?
    } else {
        position_step(ensemble, spec.family, target, spec.eta, h.expect("kernel bandwidth"))?
    };
    let reaction = spec.reaction_family();
    match spec.weight_strategy {
        WeightStrategy::Fixed => Ok(moved),
        WeightStrategy::Ca => {
            let upd = ca_weight_step(
                &moved,
                reaction,
                target,
                spec.eta,
                spec.lambda,
                h.expect("kernel bandwidth"),
                spec.weight_floor,
            )?;
            *overshoot_steps += usize::from(upd.overshoot);
            Ok(upd.ensemble)
        }
        WeightStrategy::Dk => dk_step(
            &moved,
            reaction,
            target,
            spec.eta,
            spec.lambda,
            h.expect("kernel bandwidth"),
            spec.dk_noise_scale,
            rng,
        ),
    }
}

fn record(
    trace: &mut Vec<TraceEntry>,
    options: &mut RunOptions<'_>,
    iteration: usize,
    bandwidth: Option<f64>,
    ensemble: &Ensemble,
) -> Result<()> {
    let metrics = options
        .hooks
        .iter_mut()
        .map(|hook| Ok((hook.name.clone(), (hook.eval)(ensemble)?)))
        .collect::<Result<Vec<_>>>()?;
    trace.push(TraceEntry { iteration, bandwidth, metrics });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelConfig;
    use crate::points::Points;
    use crate::targets::GaussianTarget;
    use crate::variation::Family;

    fn spec(family: Family, strategy: WeightStrategy, iterations: usize) -> AlgorithmSpec {
        AlgorithmSpec {
            iterations,
            eta: 0.1,
            kernel: KernelConfig::fixed(1.0),
            ..AlgorithmSpec::new(family, strategy)
        }
    }

    #[test]
    fn one_fixed_iteration_is_one_position_step() {
        let t = GaussianTarget::standard(1).unwrap();
        let e = Ensemble::uniform(Points::from_rows(&[[-1.0], [0.5], [2.0]]).unwrap()).unwrap();
        let rec = run(&spec(Family::Gfsd, WeightStrategy::Fixed, 1), &t, &e, &mut RunOptions::default())
            .unwrap();
        let direct = position_step(&e, Family::Gfsd, &t, 0.1, 1.0).unwrap();
        assert_eq!(rec.final_ensemble, direct);
    }

    #[test]
    fn single_particle_at_mode_is_invariant() {
        let t = GaussianTarget::standard(1).unwrap();
        let e = Ensemble::uniform(Points::from_rows(&[[0.0]]).unwrap()).unwrap();
        let rec = run(&spec(Family::Gfsd, WeightStrategy::Ca, 50), &t, &e, &mut RunOptions::default())
            .unwrap();
        assert_eq!(rec.final_ensemble, e);
    }

    #[test]
    fn trace_cadence() {
        let t = GaussianTarget::standard(1).unwrap();
        let e = Ensemble::uniform(Points::from_rows(&[[-1.0], [1.0]]).unwrap()).unwrap();
        let mut opts = RunOptions::every(4).with_hook("mass", |e: &Ensemble| Ok(e.total_mass()));
        let rec = run(&spec(Family::Blob, WeightStrategy::Ca, 10), &t, &e, &mut opts).unwrap();
        let its: Vec<usize> = rec.trace.iter().map(|t| t.iteration).collect();
        assert_eq!(its, vec![0, 4, 8, 10]);
        assert!(rec.trace.iter().all(|t| (t.metric("mass").unwrap() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn errors_carry_iteration() {
        let t = GaussianTarget::standard(1).unwrap();
        let e = Ensemble::uniform(Points::from_rows(&[[-1.0], [1.0]]).unwrap()).unwrap();
        let mut calls = 0;
        let mut opts = RunOptions::every(1).with_hook("boom", move |_: &Ensemble| {
            calls += 1;
            if calls > 3 {
                Err(crate::error::Error::InvalidInput("boom".into()))
            } else {
                Ok(0.0)
            }
        });
        let err = run(&spec(Family::Gfsd, WeightStrategy::Fixed, 10), &t, &e, &mut opts).unwrap_err();
        assert!(matches!(err, crate::error::Error::AtIteration { iteration: 3, .. }), "{err}");
    }

    #[test]
    fn identical_seeds_reproduce() {
        let t = GaussianTarget::standard(2).unwrap();
        let e = Ensemble::uniform(
            Points::from_rows(&[[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [-1.0, 0.5]]).unwrap(),
        )
        .unwrap();
        for name in ["D-GFSD-DK", "BDLS", "ULD"] {
            let s = AlgorithmSpec { iterations: 30, seed: 5, ..AlgorithmSpec::preset(name).unwrap() };
            let a = run(&s, &t, &e, &mut RunOptions::default()).unwrap();
            let b = run(&s, &t, &e, &mut RunOptions::default()).unwrap();
            assert_eq!(a.final_ensemble, b.final_ensemble, "{name}");
        }
    }
}
