//! The "ideal scenario" model: every kernel is the same distribution `nu`,
//! independent of the current state.
//!
//! Here `nu` is uniform on `[0, 1]` and every success set is `[0, p0)`, so
//! `nu(B) = p0`, `eta_p = nu` and `gamma_n(1) = p0^(n-1)` in closed form.

use rand::Rng;

use crate::fk_core::FeynmanKacModel;

#[derive(Clone, Debug, PartialEq)]
pub struct UniformIidModel {
    p0: f64,
    horizon: usize,
}

impl UniformIidModel {
    pub fn new(p0: f64, horizon: usize) -> Self {
        assert!((0.0..=1.0).contains(&p0), "success probability must lie in [0, 1]");
        assert!(horizon >= 1, "horizon must be at least 1");
        UniformIidModel { p0, horizon }
    }

    pub fn success_probability(&self) -> f64 {
        self.p0
    }

    /// Exact normalizing constant `gamma_n(1) = p0^(n-1)`.
    pub fn gamma(&self) -> f64 {
        self.p0.powi(self.horizon as i32 - 1)
    }
}

impl FeynmanKacModel for UniformIidModel {
    type State = f64;

    fn initial_point(&self) -> &f64 {
        &0.0
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample_kernel<R: Rng + ?Sized>(&self, _time: usize, _state: &f64, rng: &mut R) -> f64 {
        rng.random()
    }

    fn potential(&self, _time: usize, state: &f64) -> bool {
        *state < self.p0
    }
}
