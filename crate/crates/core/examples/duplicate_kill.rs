//! Stochastic weight dynamics: duplicate/kill keeps weights uniform and
//! instead teleports particles. Compared against plain and birth–death
//! Langevin dynamics on the planar mixture.

use dpvi::metrics::{component_mass, w2_exact, DiscreteMeasure};
use dpvi::targets::{sample_reference, GaussianMixtureTarget};
use dpvi::{run, AlgorithmSpec, Ensemble, Points, RunOptions};

fn main() -> dpvi::Result<()> {
    let target = GaussianMixtureTarget::default_planar();
    let reference = DiscreteMeasure::uniform(sample_reference(&target, 500, 0)?)?;
    // everything starts in the lighter, left component
    let rows: Vec<[f64; 2]> = (0..30).map(|i| [-2.0 + 0.05 * (i % 6) as f64, 0.1 * (i / 6) as f64 - 0.2]).collect();
    let init = Ensemble::uniform(Points::from_rows(&rows)?)?;

    for name in ["GFSD", "D-GFSD-DK", "ULD", "BDLS"] {
        let mut w2s = Vec::new();
        let mut right = Vec::new();
        for seed in 0..5 {
            let spec = AlgorithmSpec { seed, ..AlgorithmSpec::preset(name)? };
            let rec = run(&spec, &target, &init, &mut RunOptions::default())?;
            let m = DiscreteMeasure::from(&rec.final_ensemble);
            w2s.push(w2_exact(&m, &reference)?.0);
            right.push(component_mass(&target, &m)?[1]);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!("{name:>10}: W2 {:.4}  right-component mass {:.3}", mean(&w2s), mean(&right));
    }
    Ok(())
}
