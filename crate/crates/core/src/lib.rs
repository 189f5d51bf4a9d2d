//! Robust sparse Bayesian linear regression with the Bayesian Huberized lasso.
//!
//! The crate provides the fixed-`eta` Gibbs sampler, the approximate Gibbs
//! sampler that learns the robustness parameter `eta` through a gamma
//! fixed-point approximation of its full conditional, baseline samplers
//! (Bayesian lasso, median-regression lasso, Student-t lasso), and the
//! validation, simulation and prediction harnesses built on top of them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod eta_approx;
pub mod experiments;
pub mod gibbs;
pub mod influence;
pub mod io;
pub mod model;
pub mod rng_dist;
pub mod special_fn;

pub use error::{HblError, Result};
pub use gibbs::{run_baseline, run_chain, FitConfig, SamplerKind};
pub use model::{ChainState, Dataset, EtaMode, Hyperparams, LambdaMode, PosteriorSamples};
