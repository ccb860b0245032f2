//! Concrete models: the ABC compilation of hidden Markov models into
//! Feynman-Kac form, the linear-Gaussian and stable stochastic-volatility
//! instances, a stable-variate sampler, outlier injection and data loading.

pub mod abc;
pub mod data;
pub mod iid;
pub mod linear_gaussian;
pub mod outliers;
pub mod stable;
pub mod sv;

use thiserror::Error;

pub use abc::{absolute_difference, compile_abc_hmm, AbcHmm, AbcModel, AbcState, Fixed, LatentObsModel, ParametricHmm};
pub use data::{load_returns_csv, returns_from_reader};
pub use iid::UniformIidModel;
pub use linear_gaussian::{lg_abc_obs_density, lg_simulate, LgFamily, LgParam, LinearGaussianParams};
pub use outliers::{inject_outliers, OutlierInjection, DEFAULT_OUTLIER_LEVELS};
pub use stable::{sample_stable, StableParams};
pub use sv::{sv_simulate, StableSvParams, SvFamily};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: index level {value} is not strictly positive")]
    NonPositiveIndex { row: usize, value: f64 },
    #[error("i/o error: {0}")]
    Io(String),
}
