use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Scalar regression data set `{(x_i, y_i)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl RegressionData {
    /// Rescales the inputs to zero mean and unit variance.
    pub fn standardized_inputs(mut self) -> Self {
        let n = self.x.len() as f64;
        let mean = self.x.iter().sum::<f64>() / n;
        let var = self.x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for v in &mut self.x {
            *v = (*v - mean) / sd;
        }
        self
    }
}

/// Reads a two-column `range,logratio` CSV. A header row is optional.
pub fn load_lidar_csv(path: impl AsRef<Path>) -> Result<RegressionData> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        if record.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "{}: line {} has {} columns, expected 2",
                path.display(),
                line + 1,
                record.len()
            )));
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                x.push(a);
                y.push(b);
            }
            _ if line == 0 => continue,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "{}: line {} is not numeric",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{}: need at least 2 rows, found {}",
            path.display(),
            x.len()
        )));
    }
    Ok(RegressionData { x, y })
}

/// LIDAR-like stand-in: a smooth sigmoid drop on `[-1.5, 1.5]` plus
/// `N(0, 0.2²)` noise.
pub fn synthetic_lidar(n: usize, seed: u64) -> RegressionData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.2).expect("valid sd");
    let denom = (n.max(2) - 1) as f64;
    let x: Vec<f64> = (0..n).map(|i| -1.5 + 3.0 * i as f64 / denom).collect();
    let y = x
        .iter()
        .map(|&t| -0.8 / (1.0 + (-4.0 * (t - 0.3)).exp()) + noise.sample(&mut rng))
        .collect();
    RegressionData { x, y }
}
