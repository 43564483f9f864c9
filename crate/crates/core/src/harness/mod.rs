//! Experiment orchestration: JSON configs, seeded sweeps over algorithms,
//! particle counts and repeats, and CSV/JSON/SVG outputs.

mod config;
mod experiment;
mod io;
mod svg;

pub use config::{
    load_config, AlgorithmEntry, ComponentConfig, ExperimentConfig, InitConfig, MetricKind,
    ReferenceConfig, TargetConfig,
};
pub use experiment::{
    child_seed, evaluate_metrics, run_experiment, thread_cap_from_env, ExperimentResult,
    PreparedTarget, ResultRow, ResultsTable, RunSnapshot, SummaryRow, THREADS_ENV,
};
pub use io::{read_particles_csv, read_points_csv, write_outputs, write_points_csv};
pub use svg::scatter_svg;
