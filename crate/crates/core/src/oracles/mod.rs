//! Independent ground truth for checking the filters: a scalar Kalman
//! filter, grid quadrature of the ABC likelihood for tiny linear-Gaussian
//! instances, executable negative-binomial identities and the ideal-case
//! asymptotic variance.
//!
//! Nothing here calls into the particle filters.

pub mod clt;
pub mod grid;
pub mod kalman;
pub mod negbin;

use thiserror::Error;

pub use clt::{clt_variance_ideal, IidMoments};
pub use grid::{grid_abc_filtered_means, grid_abc_log_likelihood, grid_abc_posterior, GridOptions};
pub use kalman::{kalman_filter, KalmanOutput};
pub use negbin::{
    nb_identity_exact, nb_identity_mc, nb_pair_identity_exact, nb_pair_identity_mc, sample_trials_to_nth_success,
    McEstimate,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("inconsistent moments: {0}")]
    InvalidMoments(String),
    #[error("latent grid too coarse: refinement moved the posterior by {tv:.3e} in total variation")]
    GridTooCoarse { tv: f64 },
    #[error("invalid oracle input: {0}")]
    InvalidInput(String),
}
