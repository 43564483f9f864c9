//! Time stepping: position transport, continuous weight adjustment (CA),
//! duplicate/kill (DK) and Langevin baselines, composed into full runs.

mod run;
mod spec;
mod steps;

pub use run::{run, MetricFn, MetricHook, RunOptions, RunRecord, TraceEntry};
pub use spec::{AlgorithmSpec, WeightStrategy};
pub use steps::{
    ca_weight_step, centered_rates, dk_event_fires, dk_step, langevin_step, position_step,
    reweight, WeightUpdate,
};
