//! Estimation laboratory for Gaussian white noise models with nonlinear
//! pointwise links (square-root, arcsine-root, and log transforms).
//!
//! The pipeline pre-smooths an observed signal by hard wavelet thresholding
//! on an orthonormal basis of the unit interval, inverts the link pointwise, and hands
//! downstream solvers a plug-in estimate of the local noise level. The
//! supporting modules provide:
//!
//! - [`wavelet`]: periodized Daubechies and Haar bases, the orthogonal
//!   analysis/synthesis transform, and high-accuracy coefficient quadrature;
//! - [`links`]: the three link functions, clamped inverses, and the exact
//!   Kullback-Leibler divergence of the white noise experiment;
//! - [`spaces`]: closed-form test functions with exact derivatives and the
//!   flatness-aware Holder seminorms they are measured in;
//! - [`model`]: sequence-space simulation and the s-fold integration
//!   forward operator;
//! - [`estimators`]: thresholding, plug-in inversion, the bias-corrected
//!   square-root estimator, and the detector-gated log-link estimator;
//! - [`rates`]: local two-regime rate functions and the plug-in noise level;
//! - [`lower_bounds`]: constructive two-point testing pairs with numeric
//!   budget verification;
//! - [`harness`]: a reproducible Monte Carlo runner with CSV/JSON/SVG
//!   outputs.

pub mod error;
pub mod estimators;
pub mod harness;
pub mod links;
pub mod lower_bounds;
pub mod model;
pub mod quad;
pub mod rates;
pub mod spaces;
pub mod wavelet;

pub use error::{Error, Result};
pub use estimators::EstimatorConfig;
pub use harness::{ExperimentConfig, McStudy, RunResult};
pub use links::LinkKind;
pub use lower_bounds::HypothesisPair;
pub use model::Observation;
pub use rates::{RateQuery, Regime};
pub use spaces::{FunctionDescriptor, SpaceNormReport};
pub use wavelet::{CoefficientTree, WaveletBasis, WaveletFamily};
