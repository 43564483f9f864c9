//! Weighted-particle variational inference.
//!
//! Particles carry both a position and a probability weight. Positions follow
//! a finite-particle approximation of a Wasserstein gradient flow (GFSD, Blob,
//! KSDD or SVGD velocity fields); weights follow a discretized Fisher–Rao
//! reaction flow, either continuously (CA) or through duplicate/kill events
//! (DK). Unadjusted Langevin dynamics and its birth–death variant are included
//! as baselines, together with exact 2-Wasserstein and kernel Stein
//! discrepancy evaluation and a reproducible experiment harness.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`targets`] | Gaussian, Gaussian mixture and GP-hyperparameter posteriors |
//! | [`kernels`] | RBF kernel, median bandwidth, Stein kernel |
//! | [`variation`] | first variation and velocity approximations |
//! | [`engine`] | position, CA, DK and Langevin steps; full runs |
//! | [`metrics`] | exact W2, KSD², mixture mass allocation |
//! | [`harness`] | JSON configs, seeded experiment sweeps, CSV/JSON/SVG output |

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod engine;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod metrics;
pub mod points;
pub mod targets;
pub mod variation;

pub use engine::{run, AlgorithmSpec, RunOptions, RunRecord, WeightStrategy};
pub use ensemble::Ensemble;
pub use error::{Error, Result};
pub use kernels::KernelConfig;
pub use points::Points;
pub use targets::Target;
pub use variation::Family;
