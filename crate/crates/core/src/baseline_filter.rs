//! Fixed-size bootstrap particle filter with indicator weights.
//!
//! Every step propagates all `N` particles, weights them with `G_p` and
//! resamples multinomially among the alive ones. If every weight is zero
//! the system has died out: the run stops and records a [`Collapse`].
//! Estimates past that point are unavailable rather than zero.

use rand::Rng;
use thiserror::Error;

use crate::fk_core::{FeynmanKacModel, TestFunction};
use crate::rng::{seeded_rng, RNG_NAME};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResampleError {
    #[error("all resampling weights are zero")]
    AllZeroWeights,
    #[error("resample count must be at least 1")]
    EmptyRequest,
}

/// `count` indices drawn i.i.d. with probabilities proportional to
/// `weights`, by inversion on the cumulative weights.
pub fn multinomial_resample<R: Rng + ?Sized>(
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>, ResampleError> {
    if count == 0 {
        return Err(ResampleError::EmptyRequest);
    }
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut total = 0.0;
    for &w in weights {
        debug_assert!(w >= 0.0, "negative weight {w}");
        total += w;
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(ResampleError::AllZeroWeights);
    }
    Ok((0..count)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            // first index whose cumulative weight exceeds u; zero-weight
            // cells have an empty interval and are never chosen
            cumulative.partition_point(|&c| c <= u).min(weights.len() - 1)
        })
        .collect())
}

/// One step of the bootstrap filter, before resampling.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineStep<S> {
    pub time: usize,
    pub states: Vec<S>,
    pub alive: Vec<bool>,
    pub alive_count: usize,
}

impl<S> BaselineStep<S> {
    /// `eta_p(G_p)` estimate: the alive fraction.
    pub fn alive_fraction(&self) -> f64 {
        self.alive_count as f64 / self.states.len() as f64
    }

    /// Weighted filter estimate `sum G phi / sum G`; `None` if every particle
    /// is dead.
    pub fn filter_estimate(&self, phi: &TestFunction<'_, S>) -> Option<f64> {
        if self.alive_count == 0 {
            return None;
        }
        let sum: f64 = self.states.iter().zip(&self.alive).filter(|(_, &a)| a).map(|(s, _)| phi.eval(s)).sum();
        Some(sum / self.alive_count as f64)
    }

    /// Unweighted predictor estimate over all particles.
    pub fn predictor_estimate(&self, phi: &TestFunction<'_, S>) -> f64 {
        self.states.iter().map(|s| phi.eval(s)).sum::<f64>() / self.states.len() as f64
    }
}

/// Where a run died out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Collapse {
    /// 1-based time step at which every particle was dead.
    pub step: usize,
    /// Alive counts of the steps up to and including the collapse step.
    pub last_alive_counts: Vec<usize>,
}

/// Log normalizing-constant estimate, with collapse kept distinct from any
/// finite value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogNormalizer {
    Finite(f64),
    /// The product includes a zero factor.
    Collapsed,
    /// The run stopped before this step.
    Unavailable,
}

impl LogNormalizer {
    pub fn finite(self) -> Option<f64> {
        match self {
            LogNormalizer::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// `-inf` for a collapsed product; `None` when unavailable.
    pub fn as_f64(self) -> Option<f64> {
        match self {
            LogNormalizer::Finite(v) => Some(v),
            LogNormalizer::Collapsed => Some(f64::NEG_INFINITY),
            LogNormalizer::Unavailable => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineRun<S> {
    pub n_particles: usize,
    pub horizon: usize,
    /// Completed steps; the collapse step, if any, is the last entry.
    pub steps: Vec<BaselineStep<S>>,
    pub collapse: Option<Collapse>,
    pub seed: Option<u64>,
    pub rng: &'static str,
}

impl<S> BaselineRun<S> {
    pub fn collapsed(&self) -> bool {
        self.collapse.is_some()
    }

    pub fn alive_counts(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.alive_count).collect()
    }

    /// `log prod_{p<time} eta_p(G_p)`, the estimate of `gamma_time(1)`.
    pub fn log_gamma(&self, time: usize) -> LogNormalizer {
        assert!(time >= 1 && time <= self.horizon, "time {time} outside 1..={}", self.horizon);
        let mut acc = 0.0;
        for p in 1..time {
            match self.steps.get(p - 1) {
                None => return LogNormalizer::Unavailable,
                Some(s) if s.alive_count == 0 => return LogNormalizer::Collapsed,
                Some(s) => acc += s.alive_fraction().ln(),
            }
        }
        if self.steps.len() < time {
            // the factors exist but the step itself was never simulated
            return LogNormalizer::Unavailable;
        }
        LogNormalizer::Finite(acc)
    }

    /// `log prod_{p<=n} eta_p(G_p)` over the full horizon.
    pub fn log_evidence(&self) -> LogNormalizer {
        match self.log_gamma(self.horizon) {
            LogNormalizer::Finite(v) => {
                let last = &self.steps[self.horizon - 1];
                if last.alive_count == 0 {
                    LogNormalizer::Collapsed
                } else {
                    LogNormalizer::Finite(v + last.alive_fraction().ln())
                }
            }
            other => other,
        }
    }

    /// Filter estimate at 1-based `time`, or `None` past a collapse.
    pub fn filter_estimate(&self, time: usize, phi: &TestFunction<'_, S>) -> Option<f64> {
        self.steps.get(time - 1).and_then(|s| s.filter_estimate(phi))
    }
}

/// Run the bootstrap filter with `n_particles` particles from a caller-owned
/// stream.
pub fn run_standard_filter_with<M, R>(model: &M, n_particles: usize, rng: &mut R) -> BaselineRun<M::State>
where
    M: FeynmanKacModel,
    R: Rng + ?Sized,
{
    assert!(n_particles >= 1, "n_particles must be at least 1");
    let horizon = model.horizon();
    let mut run = BaselineRun {
        n_particles,
        horizon,
        steps: Vec::with_capacity(horizon),
        collapse: None,
        seed: None,
        rng: RNG_NAME,
    };
    let x0 = model.initial_point();
    for time in 1..=horizon {
        let states: Vec<M::State> = match run.steps.last() {
            None => (0..n_particles).map(|_| model.sample_kernel(1, x0, rng)).collect(),
            Some(prev) => {
                let weights: Vec<f64> = prev.alive.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
                let idx =
                    multinomial_resample(&weights, n_particles, rng).expect("previous step has an alive particle");
                idx.into_iter().map(|i| model.sample_kernel(time, &prev.states[i], rng)).collect()
            }
        };
        let alive: Vec<bool> = states.iter().map(|s| model.potential(time, s)).collect();
        let alive_count = alive.iter().filter(|&&a| a).count();
        run.steps.push(BaselineStep { time, states, alive, alive_count });
        if alive_count == 0 {
            let counts = run.alive_counts();
            let from = counts.len().saturating_sub(10);
            run.collapse = Some(Collapse { step: time, last_alive_counts: counts[from..].to_vec() });
            break;
        }
    }
    run
}

/// Run the bootstrap filter from a fresh stream derived from `seed`.
pub fn run_standard_filter<M: FeynmanKacModel>(model: &M, n_particles: usize, seed: u64) -> BaselineRun<M::State> {
    let mut run = run_standard_filter_with(model, n_particles, &mut seeded_rng(seed));
    run.seed = Some(seed);
    run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::UniformIidModel;
    use crate::stats::mean_se;

    #[test]
    fn resample_point_mass() {
        let mut rng = seeded_rng(1);
        let idx = multinomial_resample(&[1.0, 0.0, 0.0], 50, &mut rng).unwrap();
        assert!(idx.iter().all(|&i| i == 0));
        let idx = multinomial_resample(&[0.0, 0.0, 2.0], 50, &mut rng).unwrap();
        assert!(idx.iter().all(|&i| i == 2));
    }

    #[test]
    fn resample_fair_coin() {
        let mut rng = seeded_rng(2);
        let idx = multinomial_resample(&[1.0, 1.0], 100_000, &mut rng).unwrap();
        let xs: Vec<f64> = idx.iter().map(|&i| if i == 0 { 1.0 } else { 0.0 }).collect();
        let (m, _) = mean_se(&xs);
        let se = (0.25 / 1e5f64).sqrt();
        assert!((m - 0.5).abs() < 3.0 * se, "{m}");
    }

    #[test]
    fn resample_errors() {
        let mut rng = seeded_rng(3);
        assert_eq!(multinomial_resample(&[0.0, 0.0], 3, &mut rng), Err(ResampleError::AllZeroWeights));
        assert_eq!(multinomial_resample(&[1.0], 0, &mut rng), Err(ResampleError::EmptyRequest));
    }

    #[test]
    fn always_alive_never_collapses() {
        let model = UniformIidModel::new(1.0, 30);
        let run = run_standard_filter(&model, 5, 4);
        assert!(!run.collapsed());
        assert_eq!(run.steps.len(), 30);
        assert_eq!(run.log_gamma(30), LogNormalizer::Finite(0.0));
        assert_eq!(run.log_evidence(), LogNormalizer::Finite(0.0));
    }

    #[test]
    fn never_alive_collapses_immediately() {
        let model = UniformIidModel::new(0.0, 5);
        let run = run_standard_filter(&model, 10, 5);
        assert_eq!(run.collapse, Some(Collapse { step: 1, last_alive_counts: vec![0] }));
        assert_eq!(run.log_evidence(), LogNormalizer::Collapsed);
        assert_eq!(run.log_gamma(1), LogNormalizer::Finite(0.0));
        assert_eq!(run.log_gamma(2), LogNormalizer::Collapsed);
        assert_eq!(run.filter_estimate(1, &TestFunction::new(|x: &f64| *x)), None);
        assert_eq!(run.filter_estimate(3, &TestFunction::new(|x: &f64| *x)), None);
    }

    #[test]
    fn alive_fraction_is_the_per_step_factor() {
        let model = UniformIidModel::new(0.6, 12);
        for seed in 0..50 {
            let run = run_standard_filter(&model, 40, seed);
            if run.collapsed() {
                continue;
            }
            let mut acc = 0.0;
            for (p, s) in run.steps.iter().enumerate() {
                assert_eq!(s.alive_fraction(), s.alive_count as f64 / 40.0);
                assert_eq!(s.alive_count, s.alive.iter().filter(|&&a| a).count());
                assert_eq!(run.log_gamma(p + 1), LogNormalizer::Finite(acc));
                acc += s.alive_fraction().ln();
            }
        }
    }

    /// Probability that at least one of `horizon` steps has zero alive
    /// particles, by propagating the law of the per-step alive count.
    fn collapse_probability(p: f64, n: usize, horizon: usize) -> f64 {
        // alive count at each step is Binomial(n, p) whatever survived before
        let mut pmf = vec![0.0; n + 1];
        for (k, slot) in pmf.iter_mut().enumerate() {
            let binom: f64 = (0..k).map(|j| (n - j) as f64 / (j + 1) as f64).product();
            *slot = binom * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
        }
        let mut survive = 1.0;
        for _ in 0..horizon {
            survive *= pmf[1..].iter().sum::<f64>();
        }
        1.0 - survive
    }

    #[test]
    fn collapse_frequency_matches_binomial_chain() {
        let model = UniformIidModel::new(0.5, 20);
        let seeds = 10_000;
        let xs: Vec<f64> =
            (0..seeds).map(|s| if run_standard_filter(&model, 2, s).collapsed() { 1.0 } else { 0.0 }).collect();
        let (m, _) = mean_se(&xs);
        let target = collapse_probability(0.5, 2, 20);
        assert!((target - (1.0 - 0.75f64.powi(20))).abs() < 1e-15);
        let se = (target * (1.0 - target) / seeds as f64).sqrt();
        assert!((m - target).abs() < 3.0 * se, "{m} vs {target}");
    }

    #[test]
    fn deterministic_under_seed() {
        let model = UniformIidModel::new(0.3, 15);
        assert_eq!(run_standard_filter(&model, 25, 77), run_standard_filter(&model, 25, 77));
    }
}
