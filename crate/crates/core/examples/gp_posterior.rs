//! Posterior over GP log-hyperparameters (log amplitude, log inverse
//! lengthscale) on LIDAR-shaped data. The posterior has no sampler, so the
//! reference comes from a fine grid.
//!
//! Usage: `gp_posterior [lidar.csv]` — without a file, synthetic data is used.

use dpvi::metrics::{ksd_squared_with_policy, w2_exact, DiscreteMeasure};
use dpvi::targets::{grid_reference, load_lidar_csv, synthetic_lidar, GpPrior, GpRegressionTarget, GridBounds};
use dpvi::{run, AlgorithmSpec, Ensemble, Points, RunOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> dpvi::Result<()> {
    let data = match std::env::args().nth(1) {
        Some(path) => load_lidar_csv(path)?,
        None => synthetic_lidar(40, 0),
    }
    .standardized_inputs();
    println!("{} observations", data.x.len());
    let target = GpRegressionTarget::new(data.x, data.y, 0.04, GpPrior::LiteralConstant)?;

    let bounds = GridBounds { x: (-4.0, 4.0), y: (-4.0, 4.0) };
    let reference = DiscreteMeasure::uniform(grid_reference(&target, bounds, 200, 2000, 0)?)?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let flat: Vec<f64> = (0..2 * 32).map(|_| StandardNormal.sample(&mut rng)).collect();
    let init = Ensemble::uniform(Points::from_flat(flat, 2)?)?;

    for name in ["Blob", "D-Blob-CA"] {
        let spec = AlgorithmSpec { eta: 0.01, iterations: 1000, ..AlgorithmSpec::preset(name)? };
        let rec = run(&spec, &target, &init, &mut RunOptions::default())?;
        let m = DiscreteMeasure::from(&rec.final_ensemble);
        let (w2, _) = w2_exact(&m, &reference)?;
        let (ksd, h) = ksd_squared_with_policy(&target, &m, None)?;
        println!("{name:>10}: W2 {w2:.4}  KSD² {ksd:.4e} (h = {h:.3})  {:.1} s", rec.wall_time_secs);
    }
    Ok(())
}
