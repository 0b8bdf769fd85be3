//! Grouped robust regression for tool-wise surface-roughness forecasting.
//!
//! Two Bayesian linear models share a Cauchy likelihood: an independent
//! (no-pooling) model that fits every tool on its own, and a hierarchical
//! model whose per-tool slopes, intercepts and noise scales are drawn from
//! population distributions (partial pooling). Both are fitted with a
//! fixed-length Hamiltonian Monte Carlo sampler using dual-averaging
//! step-size adaptation and a diagonal mass matrix.
//!
//! Module map:
//! - [`data`]: observations, grouped datasets, x scaling.
//! - [`density`]: Cauchy / Half-Cauchy log densities with derivatives.
//! - [`model`]: parameter layout, constraint transforms, log posteriors and gradients.
//! - [`sampler`]: leapfrog integrator, step-size adaptation, multi-chain HMC.
//! - [`diagnostics`]: split R-hat, effective sample size, parameter summaries.
//! - [`predictive`]: posterior-predictive bands and holdout metrics.
//! - [`io`]: CSV formats, synthetic fleet generator, holdout splitting.
//! - [`experiment`]: the sparse-tool comparison pipeline.

pub mod data;
pub mod density;
pub mod diagnostics;
mod error;
pub mod experiment;
pub mod io;
pub mod model;
pub mod predictive;
pub mod sampler;

pub use data::{GroupData, GroupedDataset, Observation, RawRecord, XScaling};
pub use error::{Error, Result};
pub use model::{
    GroupParams, HyperConfig, HyperParams, Layout, ModelKind, ParameterVector, Posterior,
};
pub use sampler::{fit, sample, PosteriorSamples, SamplerConfig, Target};
