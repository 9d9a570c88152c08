//! Sharing pattern submodels (SPSM).
//!
//! Linear and logistic prediction models specialized to missingness patterns.
//! Every pattern `m` gets a submodel `(θ_¬m + Δ_¬m)ᵀ x_¬m + b + α_m` where the
//! main coefficients `θ` are shared by all patterns and the specializations
//! `Δ_¬m` are ℓ1-regularized towards zero, so most of them vanish.
//!
//! The crate is organized as:
//!
//! - [`data`]: CSV ingestion, one-hot encoding, standardization, mask extraction.
//! - [`patterns`]: the registry of training patterns and test-time resolution.
//! - [`spsm`]: the coupled objective and its accelerated proximal-gradient fit.
//! - [`oracle`]: closed-form Bayes-optimal quantities for linear-Gaussian data.
//! - [`synth`]: cluster-covariance simulations with structured missingness.
//! - [`baselines`]: imputation + ridge/logistic, pattern submodels, full sharing.
//! - [`eval`]: metrics, confidence intervals, grid search, learning curves.
//! - [`model`]: the versioned JSON model file shared by every method.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod patterns;
pub mod prox;
pub mod spsm;
pub mod synth;

pub use data::{Dataset, FeatureKind, FeatureSchema, PatternMask};
pub use error::{Result, SpsmError};
pub use model::{FittedModel, ModelFile};
pub use oracle::LinearGaussianDgp;
pub use patterns::{FallbackPolicy, PatternRegistry, Resolution};
pub use spsm::{Hyperparameters, MainNorm, SpsmModel, Task};
