//! Negative-binomial identities behind the unbiasedness of the alive filter.
//!
//! If `T` is the number of Bernoulli(`p`) trials needed for the `N`-th
//! success, then
//!
//! ```text
//! E[(N-1)/(T-1)]                 = p      (N >= 2)
//! E[(N-1)(N-2)/((T-1)(T-2))]     = p^2    (N >= 3)
//! ```
//!
//! Each identity has a Monte-Carlo route (direct simulation of `T` as `N`
//! plus a sum of geometric failure counts) and a deterministic route (pmf
//! summation truncated once the remaining tail mass is below `1e-12`).

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::rng::seeded_rng;
use crate::stats::mean_se;

const TAIL_MASS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub target: f64,
    pub replicates: usize,
}

impl McEstimate {
    /// `|mean - target|` in units of standard error.
    pub fn z_score(&self) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == self.target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - self.target).abs() / self.std_error
        }
    }
}

/// Trials to the `n`-th success at probability `p`.
pub fn sample_trials_to_nth_success<R: Rng + ?Sized>(p: f64, n: usize, rng: &mut R) -> u64 {
    let geo = Geometric::new(p).expect("success probability in (0, 1]");
    n as u64 + (0..n).map(|_| geo.sample(rng)).sum::<u64>()
}

fn check(p: f64, n: usize, min_n: usize) {
    assert!(p > 0.0 && p <= 1.0, "p must lie in (0, 1]");
    assert!(n >= min_n, "N must be at least {min_n}");
}

fn mc<F: Fn(u64) -> f64>(p: f64, n: usize, replicates: usize, seed: u64, target: f64, stat: F) -> McEstimate {
    assert!(replicates >= 1, "need at least one replicate");
    let mut rng = seeded_rng(seed);
    let xs: Vec<f64> = (0..replicates).map(|_| stat(sample_trials_to_nth_success(p, n, &mut rng))).collect();
    let (mean, std_error) = mean_se(&xs);
    McEstimate { mean, std_error, target, replicates }
}

/// Monte-Carlo mean of `(N-1)/(T-1)`; target `p`.
pub fn nb_identity_mc(p: f64, n: usize, replicates: usize, seed: u64) -> McEstimate {
    check(p, n, 2);
    let k = (n - 1) as f64;
    mc(p, n, replicates, seed, p, |t| k / (t - 1) as f64)
}

/// Monte-Carlo mean of `(N-1)(N-2)/((T-1)(T-2))`; target `p^2`.
pub fn nb_pair_identity_mc(p: f64, n: usize, replicates: usize, seed: u64) -> McEstimate {
    check(p, n, 3);
    let k = ((n - 1) * (n - 2)) as f64;
    mc(p, n, replicates, seed, p * p, |t| k / ((t - 1) as f64 * (t - 2) as f64))
}

/// `sum_t P(T = t) f(t)` over `t = n, n+1, ...` until the summed mass
/// reaches `1 - 1e-12`.
fn pmf_expectation<F: Fn(u64) -> f64>(p: f64, n: usize, f: F) -> f64 {
    let q = 1.0 - p;
    let mut log_pmf = n as f64 * p.ln();
    let mut t = n as u64;
    let mut mass = 0.0;
    let mut acc = 0.0;
    loop {
        let pmf = log_pmf.exp();
        mass += pmf;
        acc += pmf * f(t);
        if mass >= 1.0 - TAIL_MASS || q == 0.0 {
            break;
        }
        // P(T = t+1) / P(T = t) = t q / (t - n + 1)
        log_pmf += (t as f64).ln() - ((t - n as u64 + 1) as f64).ln() + q.ln();
        t += 1;
        assert!(t < 1 << 40, "pmf summation did not converge");
    }
    acc
}

/// `E[(N-1)/(T-1)]` by pmf summation.
pub fn nb_identity_exact(p: f64, n: usize) -> f64 {
    check(p, n, 2);
    let k = (n - 1) as f64;
    pmf_expectation(p, n, |t| k / (t - 1) as f64)
}

/// `E[(N-1)(N-2)/((T-1)(T-2))]` by pmf summation.
pub fn nb_pair_identity_exact(p: f64, n: usize) -> f64 {
    check(p, n, 3);
    let k = ((n - 1) * (n - 2)) as f64;
    pmf_expectation(p, n, |t| k / ((t - 1) as f64 * (t - 2) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sums_recover_identities() {
        for &(p, n) in &[(0.5, 2), (0.2, 20), (0.8, 5), (0.05, 3)] {
            assert!((nb_identity_exact(p, n) - p).abs() < 1e-10, "p={p} N={n}");
        }
        for &(p, n) in &[(0.5, 3), (0.3, 10), (0.9, 4)] {
            assert!((nb_pair_identity_exact(p, n) - p * p).abs() < 1e-10, "p={p} N={n}");
        }
    }

    #[test]
    fn half_two_identity_mc() {
        let est = nb_identity_mc(0.5, 2, 1_000_000, 1);
        assert!(est.z_score() < 3.0, "{est:?}");
    }

    #[test]
    fn near_certain_success() {
        let p = 1.0 - 1e-12;
        let est = nb_identity_mc(p, 4, 1000, 2);
        assert!((est.mean - 1.0).abs() < 1e-9);
        assert!((nb_identity_exact(p, 4) - p).abs() < 1e-10);
        let pair = nb_pair_identity_mc(p, 5, 1000, 3);
        assert!((pair.mean - 1.0).abs() < 1e-9);
    }

    #[test]
    fn twenty_successes_at_one_fifth() {
        let est = nb_identity_mc(0.2, 20, 200_000, 4);
        assert!(est.z_score() < 3.0, "{est:?}");
    }

    #[test]
    fn pair_identities_mc() {
        assert!(nb_pair_identity_mc(0.5, 3, 1_000_000, 5).z_score() < 3.0);
        assert!(nb_pair_identity_mc(0.3, 10, 200_000, 6).z_score() < 3.0);
    }

    #[test]
    fn standard_error_scales_with_root_replicates() {
        for &(p, n) in &[(0.3, 3), (0.6, 8)] {
            let small = nb_identity_mc(p, n, 10_000, 7);
            let big = nb_identity_mc(p, n, 160_000, 8);
            let ratio = small.std_error / big.std_error;
            assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn trial_counts_have_negative_binomial_mean() {
        let mut rng = seeded_rng(9);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_trials_to_nth_success(0.5, 2, &mut rng) as f64).collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 4.0).abs() < 3.0 * se);
    }
}
