//! Quantum circuit Born machines trained by kernel two-sample tests.
//!
//! A Born machine is a parametrized quantum circuit whose measurement
//! statistics define a generative model, `p(x) = |<x|psi(theta)>|^2`. This
//! crate simulates the layered rotation/CNOT circuit on a dense state vector,
//! scores it against a target with the squared maximum mean discrepancy
//! (MMD) under a mixture-of-Gaussians kernel, and differentiates that loss
//! with the parameter-shift rule, either exactly or from finite measurement
//! batches.
//!
//! Module map:
//!
//! - [`simulator`]: state vectors, gates, exact probabilities and sampling.
//! - [`architecture`]: parameter layout and Chow-Liu entangler construction.
//! - [`loss`]: kernels, Gram matrices and the MMD loss.
//! - [`gradient`]: parameter-shift gradients and the V-statistic generalization.
//! - [`optim`]: Adam, L-BFGS and CMA-ES.
//! - [`datasets`]: Bars-and-Stripes and the discretized Gaussian mixture.
//! - [`metrics`]: KL divergence, gradient statistics, fidelity susceptibility.
//! - [`seeding`]: sub-seed derivation from a master seed.
//! - [`experiment`]: config-driven training runs and analysis reports, used by
//!   the `qcbm` binary.
//!
//! Bit convention: qubit 0 is the most significant bit of a basis-state index.

// `!(a < b)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod architecture;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod gradient;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod seeding;
pub mod simulator;

pub use architecture::{CircuitSpec, ParameterIndex, Slot};
pub use error::{Error, Result};
pub use gradient::GradientVector;
pub use loss::{DistanceMode, KernelMatrix, KernelSpec, MmdObjective};
pub use simulator::{Gate, MeasurementBatch, StateVector};
