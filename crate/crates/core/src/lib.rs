//! Density-ratio estimation by kernel Tikhonov regularization.
//!
//! Given i.i.d. samples from `p` and `q`, the crate estimates `beta = dq/dp`
//! as a finite kernel expansion, either from the whole samples or from a
//! Nystrom subsample of both, and provides the capacity quantities and
//! a priori rules that pick the regularization parameter and subsample size.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`kernel`] | kernels, samples, Gram matrices |
//! | [`linalg`] | shifted Cholesky, eigendecomposition, inverse oracle |
//! | [`estimator`] | full and Nystrom fits, evaluation, kernel-space distance |
//! | [`capacity`] | effective dimension, uniform capacity, `alpha_star` |
//! | [`selection`] | regularization and subsample-size rules |
//! | [`synth`] | synthetic pairs with known ratio, Monte Carlo errors |
//! | [`persist`], [`io`] | model JSON and sample CSV |
//!
//! ```
//! use rnd_core::{estimator, kernel::KernelSpec, synth::SyntheticPair, kernel::Label};
//!
//! let pair = SyntheticPair::default_pair();
//! let xp = pair.draw(Label::P, 200, 1).unwrap();
//! let xq = pair.draw(Label::Q, 200, 2).unwrap();
//! let k = KernelSpec::gaussian(1.0, 1).unwrap();
//! let plan = estimator::subsample_plan(200, 200, 40, 3).unwrap();
//! let model = estimator::fit_nystrom(&k, &xp, &xq, 0.1, &plan).unwrap();
//! let values = estimator::evaluate(&model, &xp).unwrap();
//! assert_eq!(values.len(), 200);
//! ```

pub mod capacity;
pub mod error;
pub mod estimator;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod persist;
pub mod rng;
pub mod selection;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use estimator::{evaluate, fit_full, fit_nystrom, rkhs_distance, subsample_plan, FitMode, NystromPlan, RatioModel};
pub use kernel::{KernelFamily, KernelSpec, Label, Sample};
