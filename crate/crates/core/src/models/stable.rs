//! Stable random variates via the Chambers-Mallows-Stuck construction.
//!
//! Parameterization is `S(alpha, beta, sigma, mu = 0)` in the Samorodnitsky-
//! Taqqu ("S1") convention: characteristic function
//! `exp(-sigma^alpha |t|^alpha (1 - i beta sign(t) tan(pi alpha / 2)))` for
//! `alpha != 1`. With `alpha = 2` this is `N(0, 2 sigma^2)`; with
//! `alpha = 1, beta = 0` it is Cauchy with scale `sigma`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    /// Scale `xi_1 > 0`.
    pub scale: f64,
    /// Skewness `xi_2` in `[-1, 1]`.
    pub skew: f64,
    /// Stability index `xi_3` in `(0, 2]`.
    pub alpha: f64,
}

impl StableParams {
    pub fn new(scale: f64, skew: f64, alpha: f64) -> Result<Self, ModelError> {
        let p = StableParams { scale, skew, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.scale > 0.0) || !(-1.0..=1.0).contains(&self.skew) || !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(ModelError::InvalidParameter(format!(
                "stable parameters out of range: scale={} skew={} alpha={}",
                self.scale, self.skew, self.alpha
            )));
        }
        Ok(())
    }
}

/// One location-zero stable variate.
pub fn sample_stable<R: Rng + ?Sized>(params: &StableParams, rng: &mut R) -> f64 {
    let StableParams { scale, skew, alpha } = *params;
    // V uniform on (-pi/2, pi/2), W standard exponential
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    if (alpha - 1.0).abs() < 1e-12 {
        let a = FRAC_PI_2 + skew * v;
        let x = (a * v.tan() - skew * ((FRAC_PI_2 * w * v.cos()) / a).ln()) / FRAC_PI_2;
        scale * x + skew * scale * scale.ln() / FRAC_PI_2
    } else {
        let t = skew * (FRAC_PI_2 * alpha).tan();
        let b = t.atan() / alpha;
        let s = (1.0 + t * t).powf(1.0 / (2.0 * alpha));
        let x = s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
            * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
        scale * x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use crate::stats::{anderson_darling, mean_se, mean_var};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn draws(p: StableParams, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seeded_rng(seed);
        (0..n).map(|_| sample_stable(&p, &mut rng)).collect()
    }

    #[test]
    fn alpha_two_is_gaussian_with_variance_two_scale_squared() {
        let p = StableParams::new(0.7, 0.6, 2.0).unwrap();
        let xs = draws(p, 1_000_000, 1);
        let (_, v) = mean_var(&xs);
        let target = 2.0 * 0.49;
        assert!(((v - target) / target).abs() < 0.01, "{v}");
    }

    #[test]
    fn alpha_two_passes_anderson_darling() {
        let p = StableParams::new(1.3, -0.4, 2.0).unwrap();
        let xs = draws(p, 100_000, 2);
        let n = Normal::new(0.0, (2.0f64).sqrt() * 1.3).unwrap();
        let a2 = anderson_darling(&xs, |x| n.cdf(x));
        // fully specified null: 0.1% critical value
        assert!(a2 < 5.97, "A^2 = {a2}");
    }

    #[test]
    fn standard_cauchy_quantiles() {
        let p = StableParams::new(1.0, 0.0, 1.0).unwrap();
        let mut xs = draws(p, 400_000, 3);
        xs.sort_by(f64::total_cmp);
        let q = |f: f64| xs[(f * xs.len() as f64) as usize];
        let n = xs.len() as f64;
        // SE of the sample median for Cauchy: 1 / (2 f(0) sqrt(n)) = pi / (2 sqrt(n))
        let se_med = PI / (2.0 * n.sqrt());
        assert!(q(0.5).abs() < 3.0 * se_med, "median {}", q(0.5));
        let iqr = q(0.75) - q(0.25);
        assert!((iqr - 2.0).abs() < 0.04, "iqr {iqr}");
    }

    #[test]
    fn symmetric_case_has_balanced_signs() {
        let p = StableParams::new(1.0, 0.0, 1.5).unwrap();
        let signs: Vec<f64> = draws(p, 1_000_000, 4).iter().map(|x| x.signum()).collect();
        let (m, se) = mean_se(&signs);
        assert!(m.abs() < 3.0 * se);
    }

    #[test]
    fn positive_skew_shifts_mass_right() {
        let p = StableParams::new(1.0, 1.0, 1.75).unwrap();
        let xs = draws(p, 200_000, 5);
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        // beta = 1 with alpha > 1: only the right tail is heavy
        let lo = sorted[1000];
        let hi = sorted[sorted.len() - 1000];
        assert!(hi > 2.0 * lo.abs(), "q(0.005) = {lo}, q(0.995) = {hi}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StableParams::new(0.0, 0.0, 1.0).is_err());
        assert!(StableParams::new(1.0, 1.5, 1.0).is_err());
        assert!(StableParams::new(1.0, 0.0, 2.5).is_err());
        assert!(StableParams::new(1.0, 0.0, 0.0).is_err());
    }
}
