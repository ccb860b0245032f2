//! Sequential Monte Carlo for Feynman-Kac models with indicator potentials.
//!
//! The crate provides:
//!
//! - [`fk_core`]: the model abstraction every filter consumes,
//! - [`alive_filter`]: the alive particle filter, which keeps drawing until a
//!   fixed number of particles land in the success set, with unbiased
//!   normalizing-constant estimates,
//! - [`baseline_filter`]: the fixed-size bootstrap filter that can collapse,
//! - [`models`]: ABC approximations of hidden Markov models and concrete
//!   linear-Gaussian / stable stochastic-volatility instances,
//! - [`oracles`]: independent ground truth (Kalman filter, grid quadrature,
//!   negative-binomial identities, ideal-case CLT variance),
//! - [`pmmh`]: particle marginal Metropolis-Hastings driven by the alive filter.
//!
//! All randomness is passed explicitly; there is no ambient generator.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alive_filter;
pub mod baseline_filter;
pub mod fk_core;
pub mod models;
pub mod oracles;
pub mod pmmh;
pub mod rng;
pub mod stats;

pub use alive_filter::{
    alive_init, alive_step, ancestral_path, filter_estimate, gamma_estimate, lgo_step, predictor_estimate, run_filter,
    run_filter_with, sample_leaf, AbortedRun, AliveStep, FilterError, FilterOptions, FilterRun, SignedLog, Variant,
    DEFAULT_TRIAL_CAP,
};
pub use baseline_filter::{
    multinomial_resample, run_standard_filter, run_standard_filter_with, BaselineRun, BaselineStep, Collapse,
    LogNormalizer, ResampleError,
};
pub use fk_core::{validate_model, FeynmanKacModel, Particle, TestFunction, Trajectory, ValidationReport};
pub use rng::{replicate_rng, seeded_rng, SmcRng, RNG_NAME};
