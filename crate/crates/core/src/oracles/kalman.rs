//! Scalar Kalman filter for the linear-Gaussian model, started from a known
//! `z0` with zero variance.

use std::f64::consts::PI;

use crate::models::LinearGaussianParams;

#[derive(Clone, Debug, PartialEq)]
pub struct KalmanOutput {
    pub predicted_mean: Vec<f64>,
    pub predicted_var: Vec<f64>,
    pub filtered_mean: Vec<f64>,
    pub filtered_var: Vec<f64>,
    /// `log p(y_{1:k})` after each step.
    pub cumulative_log_likelihood: Vec<f64>,
}

impl KalmanOutput {
    /// `log p(y_{1:n})`.
    pub fn log_likelihood(&self) -> f64 {
        self.cumulative_log_likelihood.last().copied().unwrap_or(0.0)
    }
}

pub fn kalman_filter(params: &LinearGaussianParams, observations: &[f64]) -> KalmanOutput {
    let n = observations.len();
    let mut out = KalmanOutput {
        predicted_mean: Vec::with_capacity(n),
        predicted_var: Vec::with_capacity(n),
        filtered_mean: Vec::with_capacity(n),
        filtered_var: Vec::with_capacity(n),
        cumulative_log_likelihood: Vec::with_capacity(n),
    };
    let c = params.obs_coef;
    let (mut m, mut p) = (params.z0, 0.0);
    let mut ll = 0.0;
    for &y in observations {
        let (m_pred, p_pred) = (m, p + params.sigma_v2);
        let s = c * c * p_pred + params.sigma_w2;
        let innov = y - c * m_pred;
        ll += -0.5 * ((2.0 * PI * s).ln() + innov * innov / s);
        let gain = c * p_pred / s;
        m = m_pred + gain * innov;
        p = p_pred * params.sigma_w2 / s;
        out.predicted_mean.push(m_pred);
        out.predicted_var.push(p_pred);
        out.filtered_mean.push(m);
        out.filtered_var.push(p);
        out.cumulative_log_likelihood.push(ll);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::lg_simulate;
    use crate::rng::seeded_rng;
    use crate::stats::mean_se;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn frozen_latent_keeps_mean_at_origin() {
        let mut p = LinearGaussianParams::new(1.0, 0.5).unwrap();
        p.sigma_v2 = 0.0;
        let k = kalman_filter(&p, &[1.0, -2.0, 3.0]);
        assert!(k.filtered_mean.iter().all(|&m| m == 0.0));
        // predictive variance of Y_n is sigma_w2
        for (i, &y) in [1.0f64, -2.0, 3.0].iter().enumerate() {
            let prev = if i == 0 { 0.0 } else { k.cumulative_log_likelihood[i - 1] };
            let step = k.cumulative_log_likelihood[i] - prev;
            let expect = -0.5 * ((2.0 * PI * 0.5).ln() + y * y / 0.5);
            assert!((step - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn one_step_closed_form() {
        let p = LinearGaussianParams::new(0.8, 1.7).unwrap();
        let y = 1.3;
        let k = kalman_filter(&p, &[y]);
        let s = 4.0 * 0.8 + 1.7;
        let expect = -0.5 * ((2.0 * PI * s).ln() + y * y / s);
        assert!((k.log_likelihood() - expect).abs() < 1e-14);
    }

    #[test]
    fn matches_prior_path_importance_sampling() {
        let p = LinearGaussianParams::new(0.6, 1.1).unwrap();
        let ys = [0.4, 1.5, 0.9];
        let mut rng = seeded_rng(17);
        let reps = 1_000_000;
        let mut w = Vec::with_capacity(reps);
        for _ in 0..reps {
            let mut z = 0.0;
            let mut lik = 1.0;
            for &y in &ys {
                let v: f64 = rng.sample(StandardNormal);
                z += p.sigma_v2.sqrt() * v;
                let r = y - 2.0 * z;
                lik *= (-0.5 * r * r / p.sigma_w2).exp() / (2.0 * PI * p.sigma_w2).sqrt();
            }
            w.push(lik);
        }
        let (m, se) = mean_se(&w);
        let exact = kalman_filter(&p, &ys).log_likelihood().exp();
        assert!((m - exact).abs() < 3.0 * se, "MC {m} +- {se}, exact {exact}");
    }

    #[test]
    fn append_then_remove_is_consistent() {
        let p = LinearGaussianParams::new(1.0, 1.0).unwrap();
        let (_, ys) = lg_simulate(&p, 30, 4);
        let full = kalman_filter(&p, &ys);
        let short = kalman_filter(&p, &ys[..29]);
        assert_eq!(short.log_likelihood(), full.cumulative_log_likelihood[28]);
        assert_eq!(short.filtered_mean[..], full.filtered_mean[..29]);
    }

    #[test]
    fn filtered_variance_below_predicted() {
        let p = LinearGaussianParams::new(5.0, 0.1).unwrap();
        let (_, ys) = lg_simulate(&p, 50, 5);
        let k = kalman_filter(&p, &ys);
        for (f, pr) in k.filtered_var.iter().zip(&k.predicted_var) {
            assert!(*f > 0.0 && f <= pr);
        }
        assert!(k.log_likelihood().is_finite());
    }
}
