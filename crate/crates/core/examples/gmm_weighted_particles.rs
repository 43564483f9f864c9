//! Fixed vs dynamic weights on the 1/3–2/3 planar mixture. With weights the
//! ensemble can put more mass on the heavier component without moving more
//! particles there.
//!
//! Pass a path to also write an SVG of the D-GFSD-CA ensemble.

use dpvi::harness::scatter_svg;
use dpvi::metrics::{component_mass, w2_exact, DiscreteMeasure};
use dpvi::targets::{sample_reference, GaussianMixtureTarget};
use dpvi::{run, AlgorithmSpec, Ensemble, Points, RunOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> dpvi::Result<()> {
    let target = GaussianMixtureTarget::default_planar();
    let reference = DiscreteMeasure::uniform(sample_reference(&target, 500, 0)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let flat: Vec<f64> = (0..2 * 10).map(|_| StandardNormal.sample(&mut rng)).collect();
    let init = Ensemble::uniform(Points::from_flat(flat, 2)?)?;

    let mut last = None;
    for name in ["GFSD", "D-GFSD-CA", "Blob", "D-Blob-CA"] {
        let spec = AlgorithmSpec { seed: 1, ..AlgorithmSpec::preset(name)? };
        let rec = run(&spec, &target, &init, &mut RunOptions::default())?;
        let measure = DiscreteMeasure::from(&rec.final_ensemble);
        let (w2, _) = w2_exact(&measure, &reference)?;
        let mass = component_mass(&target, &measure)?;
        println!("{name:>10}: W2 {w2:.4}  mass (left, right) = ({:.3}, {:.3})", mass[0], mass[1]);
        if name == "D-GFSD-CA" {
            last = Some(rec.final_ensemble);
        }
    }

    if let (Some(path), Some(ens)) = (std::env::args().nth(1), last) {
        let svg = scatter_svg(&target, &ens, Some(&reference.atoms), "D-GFSD-CA, M = 10")?;
        std::fs::write(&path, svg).map_err(|e| dpvi::Error::InvalidInput(e.to_string()))?;
        println!("wrote {path}");
    }
    Ok(())
}
