//! Exact W2 between weighted point clouds and the optimal coupling.

use dpvi::metrics::{w2_bruteforce, w2_exact, DiscreteMeasure};
use dpvi::Points;

fn main() -> dpvi::Result<()> {
    let mu = DiscreteMeasure::new(Points::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])?, vec![0.5, 0.3, 0.2])?;
    let nu = DiscreteMeasure::new(Points::from_rows(&[[0.5, 0.5], [2.0, 1.0]])?, vec![0.6, 0.4])?;

    let (w2, plan) = w2_exact(&mu, &nu)?;
    println!("W2 = {w2:.6} (brute force {:.6})", w2_bruteforce(&mu, &nu)?);
    for (i, j, f) in &plan.entries {
        println!("  mu[{i}] -> nu[{j}]: {f:.3}");
    }

    // larger instance: 300 x 400 atoms
    let a = Points::from_flat((0..600).map(|k| ((k * 37 % 101) as f64 / 50.0).sin()).collect(), 2)?;
    let b = Points::from_flat((0..800).map(|k| ((k * 53 % 97) as f64 / 40.0).cos()).collect(), 2)?;
    let start = std::time::Instant::now();
    let (w2, plan) = w2_exact(&DiscreteMeasure::uniform(a)?, &DiscreteMeasure::uniform(b)?)?;
    println!("300x400: W2 = {w2:.6}, {} flows, {:.2} s", plan.entries.len(), start.elapsed().as_secs_f64());
    Ok(())
}
