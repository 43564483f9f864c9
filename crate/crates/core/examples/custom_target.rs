//! Any differentiable log-density can be a target. A banana-shaped density
//! `x₂ ~ N(b·x₁², 1)`, `x₁ ~ N(0, 2²)`, sampled with D-Blob-CA.

use dpvi::metrics::{ksd_squared_with_policy, DiscreteMeasure};
use dpvi::{run, AlgorithmSpec, Ensemble, Points, Result, RunOptions, Target};
use nalgebra::DMatrix;

#[derive(Debug)]
struct Banana {
    b: f64,
}

impl Target for Banana {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        let r = x[1] - self.b * x[0] * x[0];
        Ok(-x[0] * x[0] / 8.0 - r * r / 2.0)
    }

    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = x[1] - self.b * x[0] * x[0];
        Ok(vec![-x[0] / 4.0 + 2.0 * self.b * x[0] * r, -r])
    }

    fn score_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let r = x[1] - self.b * x[0] * x[0];
        let b = self.b;
        Ok(DMatrix::from_row_slice(2, 2, &[
            -0.25 + 2.0 * b * r - 4.0 * b * b * x[0] * x[0],
            2.0 * b * x[0],
            2.0 * b * x[0],
            -1.0,
        ]))
    }
}

fn main() -> Result<()> {
    let target = Banana { b: 0.3 };
    let rows: Vec<[f64; 2]> = (0..40).map(|i| [(i % 8) as f64 * 0.25 - 1.0, (i / 8) as f64 * 0.25 - 0.5]).collect();
    let init = Ensemble::uniform(Points::from_rows(&rows)?)?;
    for name in ["Blob", "D-Blob-CA", "KSDD"] {
        let spec = AlgorithmSpec { iterations: 1500, ..AlgorithmSpec::preset(name)? };
        let rec = run(&spec, &target, &init, &mut RunOptions::default())?;
        let (ksd, _) = ksd_squared_with_policy(&target, &DiscreteMeasure::from(&rec.final_ensemble), Some(1.0))?;
        println!("{name:>10}: KSD² (h = 1) {ksd:.4e}");
    }
    Ok(())
}
