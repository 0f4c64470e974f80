//! Robust information-theoretic learning built on generalized Gaussian kernels.
//!
//! The crate centers on a single family of cost functions: a weighted blend of
//! a correntropy-style fiducial term (error density concentrated at the
//! origin) and a pairwise error-entropy term (error samples concentrated on
//! each other), both measured with generalized Gaussian kernels whose shape
//! and dispersion are free parameters. A quantized variant trades the
//! quadratic pairwise sum for a codebook-weighted sum over far fewer terms.
//!
//! Modules:
//! - [`criterion`]: kernels, information potentials, exact score functions,
//!   and the operation counters used for complexity accounting.
//! - [`quantizer`]: online vector quantization of the scalar error stream.
//! - [`filters`]: linear adaptive filters ascending the blended potentials,
//!   plus LMS/LMF baselines.
//! - [`kernel`]: a growing kernel-recursive regressor with potential-weighted
//!   regularization.
//! - [`mlp`]: a sigmoid multilayer perceptron trained by pairwise
//!   backpropagation under the same costs.
//! - [`experiments`]: noise generators, metric recursions, and the study
//!   runners (system identification, echo cancellation, chaotic time-series
//!   prediction, classification).
//! - [`runner`]: JSON-configured experiment execution with CSV output.

pub mod criterion;
pub mod experiments;
pub mod filters;
pub mod kernel;
pub mod mlp;
pub mod quantizer;
pub mod runner;

pub use criterion::{ErrorWindow, FiducialMix, GgdParams, OpCounter};
pub use filters::{Algorithm, FilterState, RegressionSample};
pub use kernel::KernelModel;
pub use mlp::MlpNet;
pub use quantizer::Codebook;
pub use runner::{list_experiments, run_config, ExperimentConfig, RunReport};
