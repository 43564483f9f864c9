//! RBF kernel, median bandwidth, Stein kernel and KSD² of good and bad samples.

use dpvi::kernels::{median_bandwidth, rbf, stein_kernel};
use dpvi::metrics::{ksd_squared, DiscreteMeasure};
use dpvi::targets::{sample_reference, GaussianTarget};
use dpvi::Points;

fn main() -> dpvi::Result<()> {
    let target = GaussianTarget::standard(2)?;

    let (k, grad) = rbf(&[0.0, 0.0], &[1.0, 0.5], 1.0);
    println!("K = {k:.4}, grad_x K = {grad:.4?}");
    let s = stein_kernel(&target, &[0.0, 0.0], &[1.0, 0.5], 1.0)?;
    println!("k_pi = {:.4}, grad_y k_pi = {:.4?}", s.value, s.grad_second_arg);

    let good = sample_reference(&target, 200, 1)?;
    let shifted = Points::from_flat(good.as_flat().iter().map(|v| v + 0.7).collect(), 2)?;
    let h = median_bandwidth(&good)?;
    println!("median bandwidth {h:.3}");
    for (name, pts) in [("exact samples", good), ("shifted by 0.7", shifted)] {
        let ksd = ksd_squared(&target, &DiscreteMeasure::uniform(pts)?, h)?;
        println!("{name:>15}: KSD² = {ksd:.5}");
    }
    Ok(())
}
