//! Exact ABC posterior over a finite parameter set for tiny linear-Gaussian
//! instances.
//!
//! The ABC likelihood `int prod_k g_eps(y_k | z_k) f(z_k | z_{k-1}) dz_{1:n}`
//! is computed by equal-weight midpoint quadrature on a latent grid covering
//! `z0 +- half_width_sds * sqrt(n sigma_v2)`. The `n`-fold tensor sum is
//! evaluated one coordinate at a time (a transfer-matrix recursion), which is
//! the same finite sum in `O(n m^2)` work.

use std::f64::consts::PI;

use super::OracleError;
use crate::models::{lg_abc_obs_density, LgFamily, LinearGaussianParams};

/// Longest horizon the oracle accepts.
pub const MAX_GRID_HORIZON: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct GridOptions {
    /// Latent grid points per coordinate.
    pub resolution: usize,
    pub half_width_sds: f64,
    /// Largest total-variation change allowed when the grid is doubled.
    pub refinement_tol: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { resolution: 400, half_width_sds: 8.0, refinement_tol: 1e-4 }
    }
}

fn normal_pdf(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * PI * var).sqrt()
}

struct ForwardPass {
    log_likelihood: f64,
    filtered_means: Vec<f64>,
}

fn forward(
    params: &LinearGaussianParams,
    observations: &[f64],
    epsilon: f64,
    resolution: usize,
    half_width_sds: f64,
) -> Result<ForwardPass, OracleError> {
    let n = observations.len();
    if n == 0 || n > MAX_GRID_HORIZON {
        return Err(OracleError::InvalidInput(format!("horizon must be in 1..={MAX_GRID_HORIZON}, got {n}")));
    }
    if !(epsilon > 0.0) || resolution < 2 {
        return Err(OracleError::InvalidInput("need epsilon > 0 and at least two grid points".into()));
    }
    let half = half_width_sds * (n as f64 * params.sigma_v2).sqrt();
    let lo = params.z0 - half;
    let h = 2.0 * half / resolution as f64;
    let z: Vec<f64> = (0..resolution).map(|j| lo + (j as f64 + 0.5) * h).collect();
    let kernel: Vec<f64> = (0..resolution).map(|d| normal_pdf(d as f64 * h, params.sigma_v2)).collect();

    let mut log_likelihood = 0.0;
    let mut filtered_means = Vec::with_capacity(n);
    let mut alpha: Vec<f64> = z
        .iter()
        .map(|&zi| {
            normal_pdf(zi - params.z0, params.sigma_v2) * lg_abc_obs_density(params, observations[0], zi, epsilon)
        })
        .collect();
    let mut next = vec![0.0; resolution];
    for k in 0..n {
        let total: f64 = alpha.iter().sum::<f64>() * h;
        if total <= 0.0 {
            return Ok(ForwardPass { log_likelihood: f64::NEG_INFINITY, filtered_means });
        }
        log_likelihood += total.ln();
        for a in alpha.iter_mut() {
            *a /= total;
        }
        filtered_means.push(alpha.iter().zip(&z).map(|(a, zi)| a * zi).sum::<f64>() * h);
        if k + 1 == n {
            break;
        }
        let y = observations[k + 1];
        for (i, out) in next.iter_mut().enumerate() {
            let s: f64 = alpha.iter().enumerate().map(|(j, &a)| a * kernel[i.abs_diff(j)]).sum();
            *out = s * h * lg_abc_obs_density(params, y, z[i], epsilon);
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    Ok(ForwardPass { log_likelihood, filtered_means })
}

/// Log ABC likelihood of `observations` under `params` by grid quadrature.
pub fn grid_abc_log_likelihood(
    params: &LinearGaussianParams,
    observations: &[f64],
    epsilon: f64,
    resolution: usize,
    half_width_sds: f64,
) -> Result<f64, OracleError> {
    forward(params, observations, epsilon, resolution, half_width_sds).map(|f| f.log_likelihood)
}

/// ABC filtered means `E[Z_k | |U_j - y_j| < eps, j <= k]` for every `k`.
pub fn grid_abc_filtered_means(
    params: &LinearGaussianParams,
    observations: &[f64],
    epsilon: f64,
    resolution: usize,
    half_width_sds: f64,
) -> Result<Vec<f64>, OracleError> {
    forward(params, observations, epsilon, resolution, half_width_sds).map(|f| f.filtered_means)
}

fn normalized(log_post: &[f64]) -> Vec<f64> {
    let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_post.iter().map(|&l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn posterior_at(
    family: &LgFamily,
    thetas: &[Vec<f64>],
    prior: &[f64],
    observations: &[f64],
    epsilon: f64,
    opts: &GridOptions,
    resolution: usize,
) -> Result<Vec<f64>, OracleError> {
    let mut log_post = Vec::with_capacity(thetas.len());
    for (theta, &w) in thetas.iter().zip(prior) {
        let params = family.params_at(theta).map_err(|e| OracleError::InvalidInput(e.to_string()))?;
        let ll = grid_abc_log_likelihood(&params, observations, epsilon, resolution, opts.half_width_sds)?;
        log_post.push(ll + w.ln());
    }
    Ok(normalized(&log_post))
}

/// Posterior weights over a finite set of parameter values with the given
/// prior weights (need not be normalized). The grid is refined once; if the
/// weights move by more than `opts.refinement_tol` in total variation the
/// result is rejected.
pub fn grid_abc_posterior(
    family: &LgFamily,
    thetas: &[Vec<f64>],
    prior_weights: &[f64],
    observations: &[f64],
    epsilon: f64,
    opts: &GridOptions,
) -> Result<Vec<f64>, OracleError> {
    if thetas.is_empty() || thetas.len() != prior_weights.len() {
        return Err(OracleError::InvalidInput("need one prior weight per parameter value".into()));
    }
    if prior_weights.iter().any(|&w| !(w > 0.0)) {
        return Err(OracleError::InvalidInput("prior weights must be positive".into()));
    }
    let coarse = posterior_at(family, thetas, prior_weights, observations, epsilon, opts, opts.resolution)?;
    let fine = posterior_at(family, thetas, prior_weights, observations, epsilon, opts, 2 * opts.resolution)?;
    let tv = 0.5 * coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).sum::<f64>();
    if tv > opts.refinement_tol {
        return Err(OracleError::GridTooCoarse { tv });
    }
    Ok(fine)
}
