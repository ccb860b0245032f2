//! Feynman-Kac models with indicator potentials.
//!
//! A model is a time-inhomogeneous Markov chain started at a fixed point
//! `x_0`, with sample-only kernels `M_p` and success sets `B_p` entered
//! through the indicator potential `G_p = 1_{B_p}`. Time runs over
//! `1..=horizon`; `x_0` is not a particle.

use std::fmt;

use rand::Rng;

/// The object every filter in the crate consumes.
///
/// Implementations must be immutable after construction. All randomness is
/// supplied by the caller.
pub trait FeynmanKacModel: Sync {
    type State: Clone + Send + Sync + fmt::Debug;

    /// The fixed starting point `x_0`.
    fn initial_point(&self) -> &Self::State;

    /// Number of time steps `n >= 1`.
    fn horizon(&self) -> usize;

    /// Draw from `M_time(state, .)`. At `time == 1`, `state` is `x_0`.
    fn sample_kernel<R: Rng + ?Sized>(&self, time: usize, state: &Self::State, rng: &mut R) -> Self::State;

    /// Indicator potential `G_time(state)`.
    fn potential(&self, time: usize, state: &Self::State) -> bool;
}

/// A sampled state together with its potential value at its time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Particle<S> {
    pub(crate) state: S,
    pub(crate) alive: bool,
}

impl<S> Particle<S> {
    /// Evaluate the potential once and freeze the result.
    pub fn evaluate<M>(model: &M, time: usize, state: S) -> Self
    where
        M: FeynmanKacModel<State = S>,
    {
        let alive = model.potential(time, &state);
        Particle { state, alive }
    }

    pub fn state(&self) -> &S {
        &self.state
    }

    pub fn alive(&self) -> bool {
        self.alive
    }

    pub fn into_state(self) -> S {
        self.state
    }
}

/// A path `x_{1:n}`, one state per time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub states: Vec<S>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State at 1-based time `p`.
    pub fn at(&self, p: usize) -> &S {
        &self.states[p - 1]
    }
}

/// A bounded measurable function `phi` on the state space.
pub struct TestFunction<'a, S> {
    f: Box<dyn Fn(&S) -> f64 + Send + Sync + 'a>,
    bound: Option<f64>,
}

impl<'a, S> TestFunction<'a, S> {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&S) -> f64 + Send + Sync + 'a,
    {
        TestFunction { f: Box::new(f), bound: None }
    }

    /// A function with declared sup-norm bound `|phi| <= bound`. Debug builds
    /// check every evaluation against it.
    pub fn bounded<F>(bound: f64, f: F) -> Self
    where
        F: Fn(&S) -> f64 + Send + Sync + 'a,
    {
        TestFunction { f: Box::new(f), bound: Some(bound) }
    }

    pub fn constant(c: f64) -> Self {
        Self::bounded(c.abs(), move |_| c)
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn eval(&self, x: &S) -> f64 {
        let v = (self.f)(x);
        if let Some(b) = self.bound {
            debug_assert!(v.abs() <= b, "test function value {v} exceeds declared bound {b}");
        }
        v
    }
}

impl<S> fmt::Debug for TestFunction<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("bound", &self.bound).finish_non_exhaustive()
    }
}

/// Forward-simulation diagnostics produced by [`validate_model`].
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub probe_count: usize,
    /// Fraction of probes alive at each time step `1..=n` (index `p - 1`).
    pub alive_fractions: Vec<f64>,
    /// 1-based time steps where no probe was alive.
    pub degenerate_steps: Vec<usize>,
}

impl ValidationReport {
    pub fn is_healthy(&self) -> bool {
        self.degenerate_steps.is_empty()
    }
}

/// Simulate `probe_count` unweighted paths of the underlying Markov chain from
/// `x_0` and report how often each step lands in its success set.
///
/// Steps with zero alive probes are flagged; they usually point at an empty
/// or negligible `B_p`.
pub fn validate_model<M: FeynmanKacModel, R: Rng + ?Sized>(
    model: &M,
    probe_count: usize,
    rng: &mut R,
) -> ValidationReport {
    assert!(probe_count >= 1, "probe_count must be at least 1");
    let n = model.horizon();
    let mut alive = vec![0usize; n];
    for _ in 0..probe_count {
        let mut x = model.initial_point().clone();
        for (p, count) in (1..=n).zip(alive.iter_mut()) {
            x = model.sample_kernel(p, &x, rng);
            if model.potential(p, &x) {
                *count += 1;
            }
        }
    }
    let alive_fractions: Vec<f64> = alive.iter().map(|&c| c as f64 / probe_count as f64).collect();
    let degenerate_steps = alive.iter().enumerate().filter(|(_, &c)| c == 0).map(|(i, _)| i + 1).collect();
    ValidationReport { probe_count, alive_fractions, degenerate_steps }
}
