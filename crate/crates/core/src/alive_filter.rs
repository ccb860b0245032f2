//! The alive particle filter.
//!
//! At every time step the filter keeps proposing particles until the `N`-th
//! one lands in the success set. The stopping index `T_p` is random; the
//! first `T_p - 1` particles hold exactly `N - 1` alive ones and only those
//! are used for estimation and as ancestors at the next step. The final,
//! `T_p`-th particle is stored but excluded everywhere. That exclusion is what
//! makes the normalizing-constant estimate
//!
//! ```text
//! gamma_n(1) ~= prod_{p=1}^{n-1} (N - 1) / (T_p - 1)
//! ```
//!
//! unbiased.
//!
//! The Le Gland-Oudjane variant ([`Variant::Lgo`]) differs only in the
//! ancestor draw, which ranges over all `N` alive particles including the
//! final one. The same estimators are applied to both variants.
//!
//! Indices in this module are 0-based: particle `i` of a step with stopping
//! time `T` lives in `0..T`, and the final particle is `T - 1`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fk_core::{FeynmanKacModel, Particle, TestFunction, Trajectory};
use crate::rng::{seeded_rng, RNG_NAME};

/// Per-step trial cap used when none is configured.
pub const DEFAULT_TRIAL_CAP: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("step {step}: N-th alive particle not reached within {trials} trials")]
    CapExceeded { step: usize, trials: usize },
    #[error("leaf index {index} out of range (must be below {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("dead particle states were dropped by lean mode")]
    StatesDropped,
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
}

/// Ancestor-selection rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Ancestors drawn from the `N - 1` alive particles among the first `T - 1`.
    #[default]
    Alive,
    /// Ancestors drawn from all `N` alive particles.
    Lgo,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Alive => "alive",
            Variant::Lgo => "lgo",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOptions {
    /// `N`: the step stops at the `N`-th alive draw.
    pub n_alive: usize,
    pub trial_cap: usize,
    pub variant: Variant,
    /// Keep only alive particles (and their ancestors); dead draws are
    /// counted but their states are discarded.
    pub lean: bool,
}

impl FilterOptions {
    pub fn new(n_alive: usize) -> Self {
        FilterOptions { n_alive, trial_cap: DEFAULT_TRIAL_CAP, variant: Variant::Alive, lean: false }
    }

    pub fn with_cap(mut self, trial_cap: usize) -> Self {
        self.trial_cap = trial_cap;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn lean(mut self, lean: bool) -> Self {
        self.lean = lean;
        self
    }

    fn validate(&self) -> Result<(), FilterError> {
        if self.n_alive < 2 {
            return Err(FilterError::InvalidConfig(format!("n_alive must be >= 2, got {}", self.n_alive)));
        }
        if self.trial_cap < self.n_alive {
            return Err(FilterError::InvalidConfig(format!(
                "trial_cap {} is below n_alive {}",
                self.trial_cap, self.n_alive
            )));
        }
        Ok(())
    }
}

/// One completed time step.
#[derive(Clone, Debug, PartialEq)]
pub struct AliveStep<S> {
    time: usize,
    n_alive: usize,
    stopping_time: usize,
    particles: Vec<Particle<S>>,
    /// Parallel to `particles`; empty at time 1.
    ancestors: Vec<usize>,
    /// Lean mode only: original index of each retained particle, increasing.
    positions: Option<Vec<usize>>,
    /// Original indices of the `N - 1` alive particles among the first `T - 1`.
    alive_index: Vec<usize>,
}

impl<S> AliveStep<S> {
    pub fn time(&self) -> usize {
        self.time
    }

    pub fn n_alive(&self) -> usize {
        self.n_alive
    }

    /// `T_p`, the number of draws made at this step.
    pub fn stopping_time(&self) -> usize {
        self.stopping_time
    }

    pub fn is_lean(&self) -> bool {
        self.positions.is_some()
    }

    /// Indices of the alive particles eligible for estimation and ancestry.
    pub fn alive_indices(&self) -> &[usize] {
        &self.alive_index
    }

    /// Index of the final (stopping) particle.
    pub fn final_index(&self) -> usize {
        self.stopping_time - 1
    }

    fn slot(&self, index: usize) -> Option<usize> {
        match &self.positions {
            None => (index < self.particles.len()).then_some(index),
            Some(pos) => pos.binary_search(&index).ok(),
        }
    }

    /// Particle at original index `index`, if retained.
    pub fn particle(&self, index: usize) -> Option<&Particle<S>> {
        self.slot(index).map(|s| &self.particles[s])
    }

    /// Ancestor (index into the previous step) of particle `index`.
    pub fn ancestor(&self, index: usize) -> Option<usize> {
        if self.ancestors.is_empty() {
            return None;
        }
        self.slot(index).map(|s| self.ancestors[s])
    }

    /// All particles in index order. Complete only outside lean mode.
    pub fn particles(&self) -> &[Particle<S>] {
        &self.particles
    }

    /// Full ancestor table (empty at time 1). Complete only outside lean mode.
    pub fn ancestors(&self) -> &[usize] {
        &self.ancestors
    }

    /// Check the stopping-rule and ancestry invariants against the previous
    /// step, if any.
    pub fn check_invariants(&self, prev: Option<&AliveStep<S>>, variant: Variant) -> Result<(), String> {
        let n = self.n_alive;
        if self.stopping_time < n {
            return Err(format!("T = {} below N = {}", self.stopping_time, n));
        }
        if self.alive_index.len() != n - 1 {
            return Err(format!("{} eligible alive particles, expected {}", self.alive_index.len(), n - 1));
        }
        if self.alive_index.iter().any(|&i| i >= self.stopping_time - 1) {
            return Err("eligible alive index outside the first T - 1".into());
        }
        match self.particle(self.final_index()) {
            Some(p) if p.alive() => {}
            _ => return Err("final particle missing or dead".into()),
        }
        if self.positions.is_none() {
            if self.particles.len() != self.stopping_time {
                return Err("particle count differs from stopping time".into());
            }
            let alive_head = self.particles[..self.stopping_time - 1].iter().filter(|p| p.alive()).count();
            if alive_head != n - 1 {
                return Err(format!("{alive_head} alive among the first T - 1, expected {}", n - 1));
            }
        }
        for &i in &self.alive_index {
            if !self.particle(i).is_some_and(|p| p.alive()) {
                return Err(format!("index {i} listed alive but is not"));
            }
        }
        if let Some(prev) = prev {
            if self.ancestors.len() != self.particles.len() {
                return Err("ancestor table length mismatch".into());
            }
            for &a in &self.ancestors {
                let ok = match variant {
                    Variant::Alive => prev.alive_index.binary_search(&a).is_ok(),
                    Variant::Lgo => prev.alive_index.binary_search(&a).is_ok() || a == prev.final_index(),
                };
                if !ok {
                    return Err(format!("ancestor {a} is not an admissible alive particle"));
                }
            }
        } else if !self.ancestors.is_empty() {
            return Err("time-1 step carries ancestors".into());
        }
        Ok(())
    }
}

/// A (possibly partial) run of the filter.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterRun<S> {
    pub steps: Vec<AliveStep<S>>,
    pub n_alive: usize,
    pub variant: Variant,
    /// `sum_{p=1}^{n-1} log((N-1)/(T_p-1))` over the completed steps.
    pub log_gamma: f64,
    pub seed: Option<u64>,
    pub rng: &'static str,
}

fn log_factor(n_alive: usize, stopping_time: usize) -> f64 {
    ((n_alive - 1) as f64).ln() - ((stopping_time - 1) as f64).ln()
}

impl<S> FilterRun<S> {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn final_step(&self) -> &AliveStep<S> {
        self.steps.last().expect("filter run has at least one step")
    }

    pub fn stopping_times(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.stopping_time).collect()
    }

    /// Total number of draws over the whole run, `sum_p T_p`.
    pub fn total_trials(&self) -> usize {
        self.steps.iter().map(|s| s.stopping_time).sum()
    }

    /// Recompute the accumulator from the stored stopping times, summing in
    /// the same order so the result is bit-identical to `log_gamma`.
    pub fn recomputed_log_gamma(&self) -> f64 {
        let k = self.steps.len().saturating_sub(1);
        self.steps[..k].iter().fold(0.0, |acc, s| acc + log_factor(self.n_alive, s.stopping_time))
    }

    /// `log prod_{p=1}^{n} (N-1)/(T_p-1)`: the estimate of the probability
    /// that the chain visits every success set up to and including step `n`.
    /// This is the quantity used inside PMMH acceptance ratios.
    pub fn log_evidence(&self) -> f64 {
        match self.steps.last() {
            Some(last) => self.log_gamma + log_factor(self.n_alive, last.stopping_time),
            None => 0.0,
        }
    }

    /// Seed manifest string, e.g. `seed=42;rng=rand_chacha::ChaCha8Rng`.
    pub fn seed_manifest(&self) -> String {
        match self.seed {
            Some(s) => format!("seed={s};rng={}", self.rng),
            None => format!("seed=external;rng={}", self.rng),
        }
    }
}

/// A run aborted by the trial cap, with every completed step retained.
#[derive(Debug)]
pub struct AbortedRun<S> {
    pub error: FilterError,
    pub partial: FilterRun<S>,
}

impl<S> fmt::Display for AbortedRun<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} completed steps)", self.error, self.partial.steps.len())
    }
}

impl<S: fmt::Debug> std::error::Error for AbortedRun<S> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Draw until the `N`-th alive particle, in strict index order.
fn sample_until_alive<M, R, F>(
    model: &M,
    time: usize,
    opts: &FilterOptions,
    rng: &mut R,
    mut propose: F,
) -> Result<AliveStep<M::State>, FilterError>
where
    M: FeynmanKacModel,
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> (M::State, Option<usize>),
{
    let n = opts.n_alive;
    let mut particles = Vec::with_capacity(2 * n);
    let mut ancestors = Vec::new();
    let mut positions = opts.lean.then(|| Vec::with_capacity(n));
    let mut alive_index = Vec::with_capacity(n - 1);
    let mut successes = 0usize;
    let mut draws = 0usize;
    while successes < n {
        if draws == opts.trial_cap {
            return Err(FilterError::CapExceeded { step: time, trials: draws });
        }
        let (state, ancestor) = propose(rng);
        let particle = Particle::evaluate(model, time, state);
        let index = draws;
        draws += 1;
        if particle.alive() {
            successes += 1;
            if successes < n {
                alive_index.push(index);
            }
        } else if positions.is_some() {
            continue;
        }
        if let Some(pos) = positions.as_mut() {
            pos.push(index);
        }
        particles.push(particle);
        if let Some(a) = ancestor {
            ancestors.push(a);
        }
    }
    Ok(AliveStep { time, n_alive: n, stopping_time: draws, particles, ancestors, positions, alive_index })
}

/// Time-1 step: draws i.i.d. from `M_1(x_0, .)` until the `N`-th success.
pub fn alive_init<M, R>(model: &M, opts: &FilterOptions, rng: &mut R) -> Result<AliveStep<M::State>, FilterError>
where
    M: FeynmanKacModel,
    R: Rng + ?Sized,
{
    opts.validate()?;
    let x0 = model.initial_point();
    sample_until_alive(model, 1, opts, rng, |rng| (model.sample_kernel(1, x0, rng), None))
}

fn propagate<M, R>(
    prev: &AliveStep<M::State>,
    model: &M,
    time: usize,
    opts: &FilterOptions,
    rng: &mut R,
    include_final: bool,
) -> Result<AliveStep<M::State>, FilterError>
where
    M: FeynmanKacModel,
    R: Rng + ?Sized,
{
    opts.validate()?;
    if time != prev.time + 1 || time > model.horizon() {
        return Err(FilterError::InvalidConfig(format!(
            "step time {time} does not follow {} within horizon {}",
            prev.time,
            model.horizon()
        )));
    }
    if prev.n_alive != opts.n_alive {
        return Err(FilterError::InvalidConfig("n_alive changed between steps".into()));
    }
    let eligible = &prev.alive_index;
    let final_index = prev.final_index();
    let range = if include_final { eligible.len() + 1 } else { eligible.len() };
    sample_until_alive(model, time, opts, rng, |rng| {
        let k = rng.random_range(0..range);
        let a = if k < eligible.len() { eligible[k] } else { final_index };
        let parent = prev.particle(a).expect("alive particles are always retained");
        (model.sample_kernel(time, parent.state(), rng), Some(a))
    })
}

/// Step `time >= 2`: ancestors uniform over the `N - 1` alive particles
/// among the first `T_{p-1} - 1` of `prev`.
pub fn alive_step<M, R>(
    prev: &AliveStep<M::State>,
    model: &M,
    time: usize,
    opts: &FilterOptions,
    rng: &mut R,
) -> Result<AliveStep<M::State>, FilterError>
where
    M: FeynmanKacModel,
    R: Rng + ?Sized,
{
    propagate(prev, model, time, opts, rng, false)
}

/// Le Gland-Oudjane step: ancestors uniform over all `N` alive particles of
/// `prev`, including the final one.
pub fn lgo_step<M, R>(
    prev: &AliveStep<M::State>,
    model: &M,
    time: usize,
    opts: &FilterOptions,
    rng: &mut R,
) -> Result<AliveStep<M::State>, FilterError>
where
    M: FeynmanKacModel,
    R: Rng + ?Sized,
{
    propagate(prev, model, time, opts, rng, true)
}

/// Run the filter to the model horizon from a caller-owned stream.
pub fn run_filter_with<M, R>(
    model: &M,
    opts: &FilterOptions,
    rng: &mut R,
) -> Result<FilterRun<M::State>, AbortedRun<M::State>>
where
    M: FeynmanKacModel,
    R: Rng + ?Sized,
{
    let mut run = FilterRun {
        steps: Vec::with_capacity(model.horizon()),
        n_alive: opts.n_alive,
        variant: opts.variant,
        log_gamma: 0.0,
        seed: None,
        rng: RNG_NAME,
    };
    let horizon = model.horizon();
    for time in 1..=horizon {
        let step = match run.steps.last() {
            None => alive_init(model, opts, rng),
            Some(prev) => match opts.variant {
                Variant::Alive => alive_step(prev, model, time, opts, rng),
                Variant::Lgo => lgo_step(prev, model, time, opts, rng),
            },
        };
        match step {
            Ok(step) => {
                if time < horizon {
                    run.log_gamma += log_factor(opts.n_alive, step.stopping_time);
                }
                run.steps.push(step);
            }
            Err(error) => return Err(AbortedRun { error, partial: run }),
        }
    }
    Ok(run)
}

/// Run the filter with a fresh stream derived from `seed`. Deterministic in
/// `(model, opts, seed)`.
pub fn run_filter<M: FeynmanKacModel>(
    model: &M,
    opts: &FilterOptions,
    seed: u64,
) -> Result<FilterRun<M::State>, AbortedRun<M::State>> {
    let mut rng = seeded_rng(seed);
    let mut run = run_filter_with(model, opts, &mut rng).map_err(|mut aborted| {
        aborted.partial.seed = Some(seed);
        aborted
    })?;
    run.seed = Some(seed);
    Ok(run)
}

/// Predictor estimate `(1/(T-1)) sum_{i<T-1} phi(x^i)`; the final particle
/// is excluded. Needs dead states, so fails on lean steps.
pub fn predictor_estimate<S>(step: &AliveStep<S>, phi: &TestFunction<'_, S>) -> Result<f64, FilterError> {
    if step.is_lean() {
        return Err(FilterError::StatesDropped);
    }
    let head = &step.particles[..step.stopping_time - 1];
    let sum: f64 = head.iter().map(|p| phi.eval(p.state())).sum();
    Ok(sum / head.len() as f64)
}

/// Filter estimate `eta(G phi) / eta(G)`: the average of `phi` over the
/// `N - 1` eligible alive particles.
pub fn filter_estimate<S>(step: &AliveStep<S>, phi: &TestFunction<'_, S>) -> f64 {
    let sum: f64 =
        step.alive_index.iter().map(|&i| phi.eval(step.particle(i).expect("alive particle retained").state())).sum();
    sum / step.alive_index.len() as f64
}

/// A real number stored as `mantissa * exp(log_scale)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLog {
    pub log_scale: f64,
    pub mantissa: f64,
}

impl SignedLog {
    pub fn value(&self) -> f64 {
        self.mantissa * self.log_scale.exp()
    }
}

/// Unnormalized estimate `gamma_n(phi) = {prod_{p<n} (N-1)/(T_p-1)} * eta_n(phi)`
/// with the product kept in log scale and the predictor as the mantissa.
pub fn gamma_estimate<S>(run: &FilterRun<S>, phi: &TestFunction<'_, S>) -> Result<SignedLog, FilterError> {
    let eta = predictor_estimate(run.final_step(), phi)?;
    Ok(SignedLog { log_scale: run.log_gamma, mantissa: eta })
}

/// Trace the ancestry of final-step particle `leaf` back to time 1.
/// `leaf` must lie in `0..T_n - 1`.
pub fn ancestral_path<S: Clone>(run: &FilterRun<S>, leaf: usize) -> Result<Trajectory<S>, FilterError> {
    let last = run.final_step();
    let limit = last.stopping_time - 1;
    if leaf >= limit {
        return Err(FilterError::IndexOutOfRange { index: leaf, limit });
    }
    let mut states = Vec::with_capacity(run.steps.len());
    let mut index = leaf;
    for step in run.steps.iter().rev() {
        let particle = step.particle(index).ok_or(FilterError::StatesDropped)?;
        states.push(particle.state().clone());
        if let Some(a) = step.ancestor(index) {
            index = a;
        }
    }
    states.reverse();
    Ok(Trajectory { states })
}

/// Pick a leaf with probability proportional to `G_n` over the first
/// `T_n - 1` particles, i.e. uniformly over the eligible alive ones.
pub fn sample_leaf<S, R: Rng + ?Sized>(step: &AliveStep<S>, rng: &mut R) -> usize {
    let k = rng.random_range(0..step.alive_index.len());
    step.alive_index[k]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::iid::UniformIidModel;
    use crate::rng::seeded_rng;

    struct Counter {
        horizon: usize,
        pattern: Vec<bool>,
    }

    // Deterministic model: state is the draw counter, alive according to a
    // repeating pattern. Lets us hand-check stopping times.
    impl FeynmanKacModel for Counter {
        type State = u64;
        fn initial_point(&self) -> &u64 {
            &0
        }
        fn horizon(&self) -> usize {
            self.horizon
        }
        fn sample_kernel<R: Rng + ?Sized>(&self, _time: usize, _state: &u64, rng: &mut R) -> u64 {
            rng.random_range(0..self.pattern.len() as u64)
        }
        fn potential(&self, _time: usize, state: &u64) -> bool {
            self.pattern[*state as usize]
        }
    }

    #[test]
    fn always_alive_stops_at_n() {
        let model = UniformIidModel::new(1.0, 1);
        let step = alive_init(&model, &FilterOptions::new(5), &mut seeded_rng(0)).unwrap();
        assert_eq!(step.stopping_time(), 5);
        assert!(step.particles().iter().all(|p| p.alive()));
        step.check_invariants(None, Variant::Alive).unwrap();
    }

    #[test]
    fn never_alive_hits_cap() {
        let model = UniformIidModel::new(0.0, 1);
        let opts = FilterOptions::new(3).with_cap(10_000);
        let err = alive_init(&model, &opts, &mut seeded_rng(0)).unwrap_err();
        assert_eq!(err, FilterError::CapExceeded { step: 1, trials: 10_000 });
    }

    #[test]
    fn bad_options_rejected() {
        let model = UniformIidModel::new(0.5, 1);
        assert!(matches!(
            alive_init(&model, &FilterOptions::new(1), &mut seeded_rng(0)),
            Err(FilterError::InvalidConfig(_))
        ));
        assert!(matches!(
            alive_init(&model, &FilterOptions::new(5).with_cap(4), &mut seeded_rng(0)),
            Err(FilterError::InvalidConfig(_))
        ));
    }

    #[test]
    fn all_alive_step_uses_alive_ancestors() {
        let model = UniformIidModel::new(1.0, 2);
        let opts = FilterOptions::new(5);
        let mut rng = seeded_rng(4);
        let prev = alive_init(&model, &opts, &mut rng).unwrap();
        let mut seen = [false; 5];
        for _ in 0..50 {
            let step = alive_step(&prev, &model, 2, &opts, &mut rng).unwrap();
            assert_eq!(step.stopping_time(), 5);
            step.check_invariants(Some(&prev), Variant::Alive).unwrap();
            for &a in step.ancestors() {
                seen[a] = true;
            }
        }
        // indices 0..4 eligible, final index 4 never used
        assert_eq!(seen, [true, true, true, true, false]);
    }

    #[test]
    fn lgo_support_includes_final_particle() {
        let model = UniformIidModel::new(1.0, 2);
        let opts = FilterOptions::new(4).with_variant(Variant::Lgo);
        let mut rng = seeded_rng(5);
        let prev = alive_init(&model, &opts, &mut rng).unwrap();
        let mut seen = [false; 4];
        for _ in 0..100 {
            let step = lgo_step(&prev, &model, 2, &opts, &mut rng).unwrap();
            step.check_invariants(Some(&prev), Variant::Lgo).unwrap();
            for &a in step.ancestors() {
                seen[a] = true;
            }
        }
        assert_eq!(seen, [true; 4]);
    }

    #[test]
    fn horizon_one_has_unit_gamma() {
        let model = UniformIidModel::new(0.3, 1);
        let run = run_filter(&model, &FilterOptions::new(7), 11).unwrap();
        assert_eq!(run.log_gamma, 0.0);
        let g = gamma_estimate(&run, &TestFunction::constant(1.0)).unwrap();
        assert_eq!((g.log_scale, g.mantissa), (0.0, 1.0));
    }

    #[test]
    fn log_gamma_recomputes_exactly_and_is_nonpositive() {
        let model = UniformIidModel::new(0.35, 12);
        for seed in 0..20 {
            let run = run_filter(&model, &FilterOptions::new(6), seed).unwrap();
            assert_eq!(run.log_gamma.to_bits(), run.recomputed_log_gamma().to_bits());
            assert!(run.log_gamma <= 0.0);
            assert!(run.log_evidence() <= run.log_gamma);
        }
    }

    #[test]
    fn determinism_under_seed() {
        let model = UniformIidModel::new(0.4, 6);
        let opts = FilterOptions::new(9);
        assert_eq!(run_filter(&model, &opts, 3).unwrap(), run_filter(&model, &opts, 3).unwrap());
        assert_ne!(
            run_filter(&model, &opts, 3).unwrap().stopping_times(),
            run_filter(&model, &opts, 4).unwrap().stopping_times()
        );
    }

    #[test]
    fn predictor_of_potential_is_exact_ratio() {
        let model = UniformIidModel::new(0.45, 4);
        let opts = FilterOptions::new(8);
        for seed in 0..30 {
            let run = run_filter(&model, &opts, seed).unwrap();
            for (p, step) in run.steps.iter().enumerate() {
                let g = TestFunction::bounded(1.0, |x: &f64| if model.potential(p + 1, x) { 1.0 } else { 0.0 });
                let est = predictor_estimate(step, &g).unwrap();
                assert_eq!(est, 7.0 / (step.stopping_time() - 1) as f64);
            }
        }
    }

    #[test]
    fn constant_and_complement_estimates() {
        let model = UniformIidModel::new(0.5, 3);
        let run = run_filter(&model, &FilterOptions::new(10), 2).unwrap();
        let step = run.final_step();
        assert_eq!(predictor_estimate(step, &TestFunction::constant(3.5)).unwrap(), 3.5);
        assert_eq!(filter_estimate(step, &TestFunction::constant(3.5)), 3.5);
        let dead = TestFunction::bounded(1.0, |x: &f64| if *x < 0.5 { 0.0 } else { 1.0 });
        assert_eq!(filter_estimate(step, &dead), 0.0);
    }

    #[test]
    fn filter_estimate_within_alive_range() {
        let model = UniformIidModel::new(0.5, 2);
        let run = run_filter(&model, &FilterOptions::new(10), 8).unwrap();
        let step = run.final_step();
        let xs: Vec<f64> = step.alive_indices().iter().map(|&i| *step.particle(i).unwrap().state()).collect();
        let est = filter_estimate(step, &TestFunction::new(|x: &f64| *x));
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= est && est <= hi);
    }

    #[test]
    fn hand_built_ancestry() {
        let mk = |time, states: Vec<u64>, alive: Vec<bool>, anc: Vec<usize>| {
            let n_alive = alive.iter().filter(|&&a| a).count();
            let t = states.len();
            let alive_index = (0..t - 1).filter(|&i| alive[i]).collect();
            AliveStep {
                time,
                n_alive,
                stopping_time: t,
                particles: states.into_iter().zip(alive).map(|(state, alive)| Particle { state, alive }).collect(),
                ancestors: anc,
                positions: None,
                alive_index,
            }
        };
        // step 1: [10 alive, 11 dead, 12 alive, 13 alive(final)]
        let s1 = mk(1, vec![10, 11, 12, 13], vec![true, false, true, true], vec![]);
        // step 2: ancestors point at 0 or 2
        let s2 = mk(2, vec![20, 21, 22, 23], vec![false, true, true, true], vec![2, 0, 2, 0]);
        let run = FilterRun {
            steps: vec![s1, s2],
            n_alive: 3,
            variant: Variant::Alive,
            log_gamma: 0.0,
            seed: None,
            rng: RNG_NAME,
        };
        assert_eq!(ancestral_path(&run, 0).unwrap().states, vec![12, 20]);
        assert_eq!(ancestral_path(&run, 1).unwrap().states, vec![10, 21]);
        assert_eq!(ancestral_path(&run, 2).unwrap().states, vec![12, 22]);
        assert_eq!(ancestral_path(&run, 3).unwrap_err(), FilterError::IndexOutOfRange { index: 3, limit: 3 });
    }

    #[test]
    fn paths_pass_through_alive_particles() {
        let model = UniformIidModel::new(0.5, 5);
        let run = run_filter(&model, &FilterOptions::new(4), 21).unwrap();
        for leaf in 0..run.final_step().stopping_time() - 1 {
            let path = ancestral_path(&run, leaf).unwrap();
            assert_eq!(path.len(), 5);
            for p in 1..5 {
                assert!(model.potential(p, path.at(p)));
            }
        }
    }

    #[test]
    fn horizon_one_path_is_the_leaf() {
        let model = UniformIidModel::new(0.5, 1);
        let run = run_filter(&model, &FilterOptions::new(4), 1).unwrap();
        let path = ancestral_path(&run, 0).unwrap();
        assert_eq!(path.states, vec![*run.steps[0].particle(0).unwrap().state()]);
    }

    #[test]
    fn leaf_with_two_alive_is_forced() {
        let model = UniformIidModel::new(0.3, 2);
        let run = run_filter(&model, &FilterOptions::new(2), 5).unwrap();
        let step = run.final_step();
        let only = step.alive_indices()[0];
        let mut rng = seeded_rng(0);
        for _ in 0..20 {
            assert_eq!(sample_leaf(step, &mut rng), only);
        }
    }

    #[test]
    fn lean_mode_matches_full_mode() {
        let model = UniformIidModel::new(0.3, 6);
        let full = run_filter(&model, &FilterOptions::new(5), 77).unwrap();
        let lean = run_filter(&model, &FilterOptions::new(5).lean(true), 77).unwrap();
        assert_eq!(full.stopping_times(), lean.stopping_times());
        assert_eq!(full.log_gamma, lean.log_gamma);
        for (p, (a, b)) in full.steps.iter().zip(&lean.steps).enumerate() {
            assert_eq!(a.alive_indices(), b.alive_indices());
            assert_eq!(b.particles().len(), 5);
            let prev = p.checked_sub(1).map(|q| &lean.steps[q]);
            b.check_invariants(prev, Variant::Alive).unwrap();
        }
        let phi = TestFunction::new(|x: &f64| *x);
        assert_eq!(filter_estimate(full.final_step(), &phi), filter_estimate(lean.final_step(), &phi));
        assert_eq!(predictor_estimate(lean.final_step(), &phi), Err(FilterError::StatesDropped));
        let leaf = full.final_step().alive_indices()[1];
        assert_eq!(ancestral_path(&full, leaf).unwrap(), ancestral_path(&lean, leaf).unwrap());
    }

    #[test]
    fn counter_model_stopping_time_by_hand() {
        // pattern alive on states {0}; with 2 states each draw is alive w.p. 1/2
        let model = Counter { horizon: 1, pattern: vec![true, false] };
        let step = alive_init(&model, &FilterOptions::new(3), &mut seeded_rng(12)).unwrap();
        let alive: Vec<bool> = step.particles().iter().map(|p| p.alive()).collect();
        let count_head = alive[..alive.len() - 1].iter().filter(|&&a| a).count();
        assert_eq!(count_head, 2);
        assert!(*alive.last().unwrap());
    }

    #[test]
    fn aborted_run_keeps_completed_steps() {
        struct DiesAtThree;
        impl FeynmanKacModel for DiesAtThree {
            type State = f64;
            fn initial_point(&self) -> &f64 {
                &0.0
            }
            fn horizon(&self) -> usize {
                5
            }
            fn sample_kernel<R: Rng + ?Sized>(&self, _t: usize, _x: &f64, rng: &mut R) -> f64 {
                rng.random()
            }
            fn potential(&self, t: usize, _x: &f64) -> bool {
                t != 3
            }
        }
        let aborted = run_filter(&DiesAtThree, &FilterOptions::new(3).with_cap(1000), 0).unwrap_err();
        assert_eq!(aborted.error, FilterError::CapExceeded { step: 3, trials: 1000 });
        assert_eq!(aborted.partial.steps.len(), 2);
        assert_eq!(aborted.partial.seed, Some(0));
    }
}
