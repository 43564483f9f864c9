//! Runs a JSON-described sweep and writes the CSV/JSON/SVG outputs, as the
//! `dpvi run` command does.
//!
//! Usage: `experiment_from_config [config.json] [out_dir]`

use dpvi::harness::{load_config, run_experiment, write_outputs};

fn main() -> dpvi::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/gmm.json").into());
    let out = args.next().unwrap_or_else(|| "out/example".into());

    let mut config = load_config(&path)?;
    // keep the demo quick
    config.particle_counts.retain(|m| *m <= 20);
    config.repeats = config.repeats.min(3);

    let result = run_experiment(&config, None)?;
    write_outputs(&result, &config, &out)?;
    for row in result.table.summary().iter().filter(|r| r.metric == "w2") {
        println!("{:>10} M={:<3} W2 {:.4} ± {:.4}", row.algorithm, row.particles, row.mean, row.std);
    }
    println!("outputs in {out}");
    Ok(())
}
