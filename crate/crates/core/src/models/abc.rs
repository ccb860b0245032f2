//! ABC approximation of a hidden Markov model as a Feynman-Kac model.
//!
//! The state is the pair `x = (z, u)` of a latent value and a simulated
//! pseudo-observation. The kernel draws `z' ~ f_theta(. | z)` and then
//! `u' ~ g_theta(. | z')`; the potential at time `p` is one exactly when `u`
//! falls in the open ball of radius `epsilon` around the observation `y_p`.
//! Observation densities are never evaluated.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use super::ModelError;
use crate::fk_core::FeynmanKacModel;

/// Latent dynamics and observation sampler for a fixed parameter value.
pub trait LatentObsModel: Send + Sync {
    type Latent: Clone + Send + Sync + fmt::Debug;

    /// Draw `z_k ~ f(. | z_{k-1})`.
    fn sample_latent<R: Rng + ?Sized>(&self, prev: &Self::Latent, rng: &mut R) -> Self::Latent;

    /// Draw `u_k ~ g(. | z_k)`.
    fn sample_obs<R: Rng + ?Sized>(&self, latent: &Self::Latent, rng: &mut R) -> f64;
}

/// A family of dynamics indexed by a real parameter vector `theta`.
pub trait ParametricHmm: Send + Sync {
    type Dynamics: LatentObsModel;

    /// Length of `theta`.
    fn dim(&self) -> usize;

    /// Dynamics at `theta`; fails outside the parameter domain.
    fn bind(&self, theta: &[f64]) -> Result<Self::Dynamics, ModelError>;
}

/// A family with no free parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Fixed<D>(pub D);

impl<D: LatentObsModel + Clone> ParametricHmm for Fixed<D> {
    type Dynamics = D;

    fn dim(&self) -> usize {
        0
    }

    fn bind(&self, _theta: &[f64]) -> Result<D, ModelError> {
        Ok(self.0.clone())
    }
}

pub fn absolute_difference(a: f64, b: f64) -> f64 {
    (a - b).abs()
}

type Latent<F> = <<F as ParametricHmm>::Dynamics as LatentObsModel>::Latent;

/// Observed data plus everything needed to build the ABC Feynman-Kac model
/// at any parameter value.
pub struct AbcHmm<F: ParametricHmm> {
    pub family: F,
    /// Ball radius; `f64::INFINITY` accepts every pseudo-observation.
    pub epsilon: f64,
    pub observations: Arc<[f64]>,
    pub initial_latent: Latent<F>,
    pub metric: fn(f64, f64) -> f64,
}

impl<F: ParametricHmm> AbcHmm<F> {
    pub fn new(family: F, epsilon: f64, observations: Vec<f64>, initial_latent: Latent<F>) -> Result<Self, ModelError> {
        if !(epsilon > 0.0) {
            return Err(ModelError::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if observations.is_empty() {
            return Err(ModelError::InvalidParameter("at least one observation is required".into()));
        }
        Ok(AbcHmm { family, epsilon, observations: observations.into(), initial_latent, metric: absolute_difference })
    }

    pub fn with_metric(mut self, metric: fn(f64, f64) -> f64) -> Self {
        self.metric = metric;
        self
    }

    pub fn horizon(&self) -> usize {
        self.observations.len()
    }
}

impl<D: LatentObsModel + Clone> AbcHmm<Fixed<D>> {
    pub fn fixed(
        dynamics: D,
        epsilon: f64,
        observations: Vec<f64>,
        initial_latent: D::Latent,
    ) -> Result<Self, ModelError> {
        Self::new(Fixed(dynamics), epsilon, observations, initial_latent)
    }
}

impl<F: ParametricHmm + fmt::Debug> fmt::Debug for AbcHmm<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AbcHmm")
            .field("family", &self.family)
            .field("epsilon", &self.epsilon)
            .field("horizon", &self.observations.len())
            .field("initial_latent", &self.initial_latent)
            .finish()
    }
}

/// State `x = (z, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AbcState<L> {
    pub z: L,
    pub u: f64,
}

/// The compiled Feynman-Kac model at a fixed `theta`.
pub struct AbcModel<D: LatentObsModel> {
    dynamics: D,
    epsilon: f64,
    observations: Arc<[f64]>,
    x0: AbcState<D::Latent>,
    metric: fn(f64, f64) -> f64,
}

impl<D: LatentObsModel> AbcModel<D> {
    pub fn dynamics(&self) -> &D {
        &self.dynamics
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }
}

/// Build the Feynman-Kac model for `theta`; the horizon is the number of
/// observations.
pub fn compile_abc_hmm<F: ParametricHmm>(hmm: &AbcHmm<F>, theta: &[f64]) -> Result<AbcModel<F::Dynamics>, ModelError> {
    if theta.len() != hmm.family.dim() {
        return Err(ModelError::InvalidParameter(format!(
            "theta has length {}, family expects {}",
            theta.len(),
            hmm.family.dim()
        )));
    }
    let dynamics = hmm.family.bind(theta)?;
    Ok(AbcModel {
        dynamics,
        epsilon: hmm.epsilon,
        observations: Arc::clone(&hmm.observations),
        // u_0 is never tested against a ball
        x0: AbcState { z: hmm.initial_latent.clone(), u: f64::NAN },
        metric: hmm.metric,
    })
}

impl<D: LatentObsModel> FeynmanKacModel for AbcModel<D> {
    type State = AbcState<D::Latent>;

    fn initial_point(&self) -> &Self::State {
        &self.x0
    }

    fn horizon(&self) -> usize {
        self.observations.len()
    }

    fn sample_kernel<R: Rng + ?Sized>(&self, _time: usize, state: &Self::State, rng: &mut R) -> Self::State {
        let z = self.dynamics.sample_latent(&state.z, rng);
        let u = self.dynamics.sample_obs(&z, rng);
        AbcState { z, u }
    }

    fn potential(&self, time: usize, state: &Self::State) -> bool {
        (self.metric)(state.u, self.observations[time - 1]) < self.epsilon
    }
}
