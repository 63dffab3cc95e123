//! Optimizers for circuit parameters.
//!
//! [`adam`] consumes noisy gradients, [`lbfgs`] needs exact ones, and
//! [`cmaes`] uses loss values only.

pub mod adam;
pub mod cmaes;
pub mod lbfgs;

pub use adam::{AdamConfig, AdamState};
pub use cmaes::{cmaes_minimize, CmaesConfig, CmaesGeneration, CmaesResult, CmaesState};
pub use lbfgs::{lbfgs_minimize, LbfgsConfig, LbfgsIterate, LbfgsResult, LbfgsStatus};

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
