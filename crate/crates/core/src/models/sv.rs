//! Stochastic-volatility model with stable observation noise
//!
//! ```text
//! Y_n = e_n * beta * exp(Z_n),   e_n ~ S(xi_3, xi_2, xi_1, 0)
//! Z_n = phi * Z_{n-1} + V_n,     V_n ~ N(0, c)
//! ```
//!
//! `theta = (beta, c, phi)`; the stable parameters are fixed per run.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::abc::{LatentObsModel, ParametricHmm};
use super::stable::{sample_stable, StableParams};
use super::ModelError;
use crate::rng::seeded_rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableSvParams {
    pub beta: f64,
    /// Latent noise variance.
    pub c: f64,
    /// Autoregressive coefficient.
    pub phi: f64,
    pub noise: StableParams,
}

impl StableSvParams {
    pub fn new(beta: f64, c: f64, phi: f64, noise: StableParams) -> Result<Self, ModelError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("latent variance c must be positive, got {c}")));
        }
        if !beta.is_finite() || !phi.is_finite() {
            return Err(ModelError::InvalidParameter("beta and phi must be finite".into()));
        }
        noise.validate()?;
        Ok(StableSvParams { beta, c, phi, noise })
    }
}

impl LatentObsModel for StableSvParams {
    type Latent = f64;

    fn sample_latent<R: Rng + ?Sized>(&self, prev: &f64, rng: &mut R) -> f64 {
        let v: f64 = rng.sample(StandardNormal);
        self.phi * prev + self.c.sqrt() * v
    }

    fn sample_obs<R: Rng + ?Sized>(&self, latent: &f64, rng: &mut R) -> f64 {
        sample_stable(&self.noise, rng) * self.beta * latent.exp()
    }
}

/// `theta = (beta, c, phi)` with fixed stable noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvFamily {
    pub noise: StableParams,
}

impl ParametricHmm for SvFamily {
    type Dynamics = StableSvParams;

    fn dim(&self) -> usize {
        3
    }

    fn bind(&self, theta: &[f64]) -> Result<StableSvParams, ModelError> {
        StableSvParams::new(theta[0], theta[1], theta[2], self.noise)
    }
}

/// Simulate `(latent path, observations)` from `z0`.
pub fn sv_simulate(params: &StableSvParams, horizon: usize, z0: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = seeded_rng(seed);
    let mut z = z0;
    let mut latent = Vec::with_capacity(horizon);
    let mut obs = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        z = params.sample_latent(&z, &mut rng);
        obs.push(params.sample_obs(&z, &mut rng));
        latent.push(z);
    }
    (latent, obs)
}
