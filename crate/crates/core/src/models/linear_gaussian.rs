//! Scalar linear-Gaussian state-space model
//!
//! ```text
//! Z_n = Z_{n-1} + V_n,      V_n ~ N(0, sigma_v2)
//! Y_n = 2 Z_n + W_n,        W_n ~ N(0, sigma_w2)
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use super::abc::{LatentObsModel, ParametricHmm};
use super::ModelError;
use crate::rng::seeded_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianParams {
    pub sigma_v2: f64,
    pub sigma_w2: f64,
    #[serde(default = "default_obs_coef")]
    pub obs_coef: f64,
    #[serde(default)]
    pub z0: f64,
}

fn default_obs_coef() -> f64 {
    2.0
}

impl LinearGaussianParams {
    pub fn new(sigma_v2: f64, sigma_w2: f64) -> Result<Self, ModelError> {
        let p = LinearGaussianParams { sigma_v2, sigma_w2, obs_coef: 2.0, z0: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_z0(mut self, z0: f64) -> Self {
        self.z0 = z0;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.sigma_v2 > 0.0 && self.sigma_v2.is_finite()) || !(self.sigma_w2 > 0.0 && self.sigma_w2.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "variances must be positive and finite, got sigma_v2={} sigma_w2={}",
                self.sigma_v2, self.sigma_w2
            )));
        }
        Ok(())
    }

    /// Zero-noise parameters for degenerate-case tests only.
    #[cfg(test)]
    pub(crate) fn degenerate(z0: f64) -> Self {
        LinearGaussianParams { sigma_v2: 0.0, sigma_w2: 0.0, obs_coef: 2.0, z0 }
    }
}

impl LatentObsModel for LinearGaussianParams {
    type Latent = f64;

    fn sample_latent<R: Rng + ?Sized>(&self, prev: &f64, rng: &mut R) -> f64 {
        let v: f64 = rng.sample(StandardNormal);
        prev + self.sigma_v2.sqrt() * v
    }

    fn sample_obs<R: Rng + ?Sized>(&self, latent: &f64, rng: &mut R) -> f64 {
        let w: f64 = rng.sample(StandardNormal);
        self.obs_coef * latent + self.sigma_w2.sqrt() * w
    }
}

/// Which variance a coordinate of `theta` controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LgParam {
    SigmaV2,
    SigmaW2,
}

/// Linear-Gaussian family with some variances free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LgFamily {
    pub base: LinearGaussianParams,
    pub free: Vec<LgParam>,
}

impl LgFamily {
    pub fn params_at(&self, theta: &[f64]) -> Result<LinearGaussianParams, ModelError> {
        let mut p = self.base.clone();
        for (which, &value) in self.free.iter().zip(theta) {
            match which {
                LgParam::SigmaV2 => p.sigma_v2 = value,
                LgParam::SigmaW2 => p.sigma_w2 = value,
            }
        }
        p.validate()?;
        Ok(p)
    }
}

impl ParametricHmm for LgFamily {
    type Dynamics = LinearGaussianParams;

    fn dim(&self) -> usize {
        self.free.len()
    }

    fn bind(&self, theta: &[f64]) -> Result<LinearGaussianParams, ModelError> {
        self.params_at(theta)
    }
}

/// Forward-simulate `(latent path, observations)` for `horizon` steps.
pub fn lg_simulate(params: &LinearGaussianParams, horizon: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = seeded_rng(seed);
    let mut z = params.z0;
    let mut latent = Vec::with_capacity(horizon);
    let mut obs = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        z = params.sample_latent(&z, &mut rng);
        obs.push(params.sample_obs(&z, &mut rng));
        latent.push(z);
    }
    (latent, obs)
}

/// `Phi(b) - Phi(a)` for `a <= b`, evaluated on whichever tail keeps
/// precision.
pub(crate) fn normal_interval(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a / s) - erfc(b / s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / s) - erfc(-a / s))
    } else {
        0.5 * (erf(b / s) - erf(a / s))
    }
}

/// ABC observation density
///
/// ```text
/// g_eps(y | z) = [Phi((y + eps - 2z)/sigma_w) - Phi((y - eps - 2z)/sigma_w)] / (2 eps)
/// ```
///
/// the probability that a Gaussian pseudo-observation lands in the ball
/// `B_eps(y)`, divided by the ball's length.
pub fn lg_abc_obs_density(params: &LinearGaussianParams, y: f64, z: f64, epsilon: f64) -> f64 {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let sd = params.sigma_w2.sqrt();
    let center = y - params.obs_coef * z;
    normal_interval((center - epsilon) / sd, (center + epsilon) / sd) / (2.0 * epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_rng;
    use crate::stats::mean_var;

    #[test]
    fn degenerate_noise_is_constant() {
        let p = LinearGaussianParams::degenerate(1.5);
        let (z, y) = lg_simulate(&p, 10, 3);
        assert!(z.iter().all(|&v| v == 1.5));
        assert!(y.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn variances_validated() {
        assert!(LinearGaussianParams::new(0.0, 1.0).is_err());
        assert!(LinearGaussianParams::new(1.0, -1.0).is_err());
        assert!(LinearGaussianParams::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn first_observation_centered_and_second_latent_variance() {
        let p = LinearGaussianParams::new(0.7, 1.3).unwrap();
        let reps = 100_000;
        let mut y1 = Vec::with_capacity(reps);
        let mut z2 = Vec::with_capacity(reps);
        for r in 0..reps {
            let mut rng = replicate_rng(99, r as u64);
            let a = p.sample_latent(&0.0, &mut rng);
            y1.push(p.sample_obs(&a, &mut rng));
            z2.push(p.sample_latent(&a, &mut rng));
        }
        let (m, v) = mean_var(&y1);
        assert!(m.abs() < 3.0 * (v / reps as f64).sqrt());
        // Var(Z_2) = 2 sigma_v2; SE of the sample variance of a normal is
        // sigma^2 sqrt(2/(R-1)).
        let (_, vz) = mean_var(&z2);
        let target = 2.0 * 0.7;
        assert!((vz - target).abs() < 3.0 * target * (2.0 / (reps - 1) as f64).sqrt(), "{vz}");
    }

    #[test]
    fn density_small_ball_limit() {
        let p = LinearGaussianParams::new(1.0, 0.64).unwrap();
        let sd = 0.8;
        let y = 1.2;
        let v = lg_abc_obs_density(&p, y, y / 2.0, 1e-4 * sd);
        let mode = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
        assert!(((v - mode) / mode).abs() < 1e-6, "{v} vs {mode}");
    }

    #[test]
    fn density_integrates_to_one_in_y() {
        let p = LinearGaussianParams::new(1.0, 1.5).unwrap();
        let (z, eps) = (0.3, 0.7);
        let h = 1e-3;
        let lo = 2.0 * z - 20.0;
        let steps = (40.0 / h) as usize;
        let total: f64 = (0..steps).map(|i| lg_abc_obs_density(&p, lo + (i as f64 + 0.5) * h, z, eps) * h).sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn density_huge_ball() {
        let p = LinearGaussianParams::new(1.0, 1.0).unwrap();
        let eps = 1e7;
        let v = lg_abc_obs_density(&p, 3.0, -1.0, eps);
        assert!(((v - 0.5 / eps) * 2.0 * eps).abs() < 1e-9);
    }

    #[test]
    fn density_positive_and_monotone_in_distance() {
        let p = LinearGaussianParams::new(1.0, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..60 {
            let z = 0.25 * k as f64;
            let v = lg_abc_obs_density(&p, 0.0, z, 0.5);
            assert!(v > 0.0, "not positive at z={z}");
            assert!(v < last);
            last = v;
        }
    }
}
