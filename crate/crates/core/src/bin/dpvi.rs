use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpvi::harness::{
    evaluate_metrics, load_config, read_particles_csv, read_points_csv, run_experiment, write_outputs,
    MetricKind, PreparedTarget, TargetConfig,
};
use dpvi::metrics::DiscreteMeasure;
use dpvi::Error;

/// Weighted-particle variational inference experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; also capped by DPVI_THREADS.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Score a particle file against a target and reference sample.
    Metrics {
        #[arg(long)]
        particles: PathBuf,
        /// Target description, same schema as the config's `target` field.
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Fixed KSD bandwidth; median heuristic when omitted.
        #[arg(long)]
        ksd_bandwidth: Option<f64>,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e)
}

fn runtime_err(e: Error) -> Failure {
    match e {
        Error::Config(_) => Failure::Config(e),
        e => Failure::Runtime(e),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load_config(&config).map_err(config_err)?;
            let specs = cfg.resolved_algorithms().map_err(config_err)?;
            println!("ok: {} algorithm(s), particle counts {:?}, {} repeat(s)", specs.len(), cfg.particle_counts, cfg.repeats);
            Ok(())
        }
        Command::Run { config, out, jobs } => {
            let cfg = load_config(&config).map_err(config_err)?;
            let out = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let result = run_experiment(&cfg, jobs).map_err(runtime_err)?;
            write_outputs(&result, &cfg, &out).map_err(runtime_err)?;
            for row in result.table.summary() {
                println!(
                    "{:<12} M={:<5} {:<14} {:.6} ± {:.6} (n={})",
                    row.algorithm, row.particles, row.metric, row.mean, row.std, row.count
                );
            }
            let failed = result.table.errors().count();
            if failed > 0 {
                eprintln!("{failed} run(s) failed; see results.csv");
                return Err(Failure::Runtime(Error::InvalidInput(format!("{failed} run(s) failed"))));
            }
            Ok(())
        }
        Command::Metrics { particles, target, reference, ksd_bandwidth } => {
            let text = std::fs::read_to_string(&target).map_err(|e| config_err(Error::Io { path: target.clone(), source: e }))?;
            let tcfg: TargetConfig = serde_json::from_str(&text)
                .map_err(|e| config_err(Error::Config(format!("{}: {e}", target.display()))))?;
            let prepared = PreparedTarget::from_config(&tcfg).map_err(config_err)?;
            let ensemble = read_particles_csv(&particles).map_err(runtime_err)?;
            let reference = DiscreteMeasure::uniform(read_points_csv(&reference).map_err(runtime_err)?).map_err(runtime_err)?;
            let mut kinds = vec![MetricKind::W2, MetricKind::Ksd];
            if prepared.mixture.is_some() {
                kinds.push(MetricKind::ComponentMass);
            }
            let values = evaluate_metrics(&prepared, &reference, &ensemble, &kinds, ksd_bandwidth).map_err(runtime_err)?;
            let obj: serde_json::Map<String, serde_json::Value> =
                values.into_iter().map(|(k, v)| (k, serde_json::json!(v))).collect();
            println!("{}", serde_json::to_string_pretty(&obj).expect("metrics are serialisable"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
