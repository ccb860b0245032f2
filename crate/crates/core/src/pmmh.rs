//! Particle marginal Metropolis-Hastings with the alive filter.
//!
//! Each iteration proposes `theta'`, runs a fresh alive filter at `theta'`
//! and accepts with probability
//!
//! ```text
//! 1 ^ [gamma'(1) pi(theta') q(theta | theta')] / [gamma(1) pi(theta) q(theta' | theta)]
//! ```
//!
//! where `gamma(1) = prod_{p=1}^{n} (N-1)/(T_p-1)` over every observation.
//! The estimate stored at the current point is never recomputed; it only
//! changes when a proposal is accepted.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::alive_filter::{ancestral_path, run_filter_with, sample_leaf, FilterError, FilterOptions};
use crate::fk_core::{FeynmanKacModel, Trajectory};
use crate::models::{compile_abc_hmm, AbcHmm, AbcState, LatentObsModel, ParametricHmm};
use crate::rng::seeded_rng;

/// Redraws of `theta(0)` allowed before giving up.
pub const DEFAULT_INIT_ATTEMPTS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmmhError {
    #[error("no initial parameter produced a completed filter run in {attempts} attempts")]
    InitFailed { attempts: usize },
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
}

/// Prior on one coordinate of `theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    Normal {
        mean: f64,
        variance: f64,
    },
    /// Density `b^a / Gamma(a) x^(-a-1) exp(-b/x)` on `x > 0`, with mode
    /// `b / (a + 1)`.
    InverseGamma {
        shape: f64,
        scale: f64,
    },
    /// Finite support with positive (unnormalized) weights.
    Discrete {
        values: Vec<f64>,
        weights: Vec<f64>,
    },
    PointMass {
        value: f64,
    },
}

impl Prior {
    fn validate(&self) -> Result<(), PmmhError> {
        let ok = match self {
            Prior::Normal { mean, variance } => mean.is_finite() && *variance > 0.0,
            Prior::InverseGamma { shape, scale } => *shape > 0.0 && *scale > 0.0,
            Prior::Discrete { values, weights } => {
                !values.is_empty() && values.len() == weights.len() && weights.iter().all(|&w| w > 0.0)
            }
            Prior::PointMass { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(PmmhError::InvalidConfig(format!("invalid prior {self:?}")))
        }
    }

    /// Log density (or log mass for discrete priors); `-inf` off the support.
    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            Prior::Normal { mean, variance } => {
                let d = x - mean;
                -0.5 * (2.0 * PI * variance).ln() - 0.5 * d * d / variance
            }
            Prior::InverseGamma { shape, scale } => {
                if x > 0.0 {
                    shape * scale.ln() - ln_gamma(*shape) - (shape + 1.0) * x.ln() - scale / x
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::Discrete { values, weights } => match values.iter().position(|&v| v == x) {
                Some(i) => (weights[i] / weights.iter().sum::<f64>()).ln(),
                None => f64::NEG_INFINITY,
            },
            Prior::PointMass { value } => {
                if x == *value {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Prior::Normal { mean, variance } => Normal::new(*mean, variance.sqrt()).expect("validated").sample(rng),
            Prior::InverseGamma { shape, scale } => {
                let g: f64 = Gamma::new(*shape, 1.0).expect("validated").sample(rng);
                scale / g
            }
            Prior::Discrete { values, weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (v, w) in values.iter().zip(weights) {
                    if u < *w {
                        return *v;
                    }
                    u -= w;
                }
                *values.last().expect("validated")
            }
            Prior::PointMass { value } => *value,
        }
    }
}

/// Independent priors, one per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriorSpec(pub Vec<Prior>);

impl PriorSpec {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn validate(&self) -> Result<(), PmmhError> {
        self.0.iter().try_for_each(Prior::validate)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.0.iter().map(|p| p.sample(rng)).collect()
    }
}

/// Sum of per-coordinate log prior densities; `-inf` outside the support.
pub fn log_prior_density(theta: &[f64], priors: &PriorSpec) -> f64 {
    assert_eq!(theta.len(), priors.dim(), "theta and prior dimensions differ");
    theta.iter().zip(&priors.0).map(|(&x, p)| p.log_density(x)).sum()
}

/// Proposal for one coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    RandomWalkNormal {
        variance: f64,
    },
    /// Gamma with mean equal to the current point and the given variance:
    /// shape `x^2 / v`, scale `v / x`.
    GammaCentered {
        variance: f64,
    },
    /// Uniform over a finite set, independent of the current point.
    UniformGrid {
        values: Vec<f64>,
    },
    /// Coordinate held fixed.
    Frozen,
}

impl Proposal {
    fn validate(&self) -> Result<(), PmmhError> {
        let ok = match self {
            Proposal::RandomWalkNormal { variance } | Proposal::GammaCentered { variance } => *variance > 0.0,
            Proposal::UniformGrid { values } => !values.is_empty(),
            Proposal::Frozen => true,
        };
        if ok {
            Ok(())
        } else {
            Err(PmmhError::InvalidConfig(format!("invalid proposal {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, current: f64, rng: &mut R) -> f64 {
        match self {
            Proposal::RandomWalkNormal { variance } => {
                current + Normal::new(0.0, variance.sqrt()).expect("validated").sample(rng)
            }
            Proposal::GammaCentered { variance } => {
                assert!(current > 0.0, "gamma proposal needs a positive current point");
                Gamma::new(current * current / variance, variance / current)
                    .expect("positive shape and scale")
                    .sample(rng)
            }
            Proposal::UniformGrid { values } => values[rng.random_range(0..values.len())],
            Proposal::Frozen => current,
        }
    }

    /// `log q(to | from)` up to terms that cancel in the ratio.
    pub fn log_density(&self, from: f64, to: f64) -> f64 {
        match self {
            // symmetric
            Proposal::RandomWalkNormal { .. } | Proposal::UniformGrid { .. } | Proposal::Frozen => 0.0,
            Proposal::GammaCentered { variance } => {
                if to <= 0.0 || from <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let k = from * from / variance;
                let s = variance / from;
                -ln_gamma(k) - k * s.ln() + (k - 1.0) * to.ln() - to / s
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProposalSpec(pub Vec<Proposal>);

impl ProposalSpec {
    pub fn validate(&self) -> Result<(), PmmhError> {
        self.0.iter().try_for_each(Proposal::validate)
    }

    pub fn sample<R: Rng + ?Sized>(&self, current: &[f64], rng: &mut R) -> Vec<f64> {
        self.0.iter().zip(current).map(|(q, &x)| q.sample(x, rng)).collect()
    }

    pub fn log_density(&self, from: &[f64], to: &[f64]) -> f64 {
        self.0.iter().zip(from.iter().zip(to)).map(|(q, (&a, &b))| q.log_density(a, b)).sum()
    }
}

/// Result of one likelihood estimate at a parameter value.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate<P> {
    pub log_gamma: f64,
    pub trajectory: Option<Trajectory<P>>,
    /// Draws used, `sum_p T_p` for a filter run.
    pub trials: usize,
}

/// Why an estimate could not be produced.
#[derive(Clone, Debug, PartialEq)]
pub enum EstimateFailure {
    /// The filter hit its trial cap after `trials` draws.
    CapExceeded { trials: usize },
    /// `theta` is outside the family's parameter domain.
    OutOfDomain,
}

/// A (possibly noisy) non-negative unbiased estimator of the likelihood.
pub trait LikelihoodEstimator: Sync {
    type Path: Clone + Send;

    fn dim(&self) -> usize;

    /// Deterministic in `(theta, seed)`.
    fn estimate(&self, theta: &[f64], seed: u64) -> Result<Estimate<Self::Path>, EstimateFailure>;
}

/// Alive-filter estimator for an ABC hidden Markov model.
pub struct AliveEstimator<F: ParametricHmm> {
    pub hmm: AbcHmm<F>,
    pub opts: FilterOptions,
    /// Sample and return an ancestral trajectory with every estimate.
    pub keep_trajectory: bool,
}

impl<F: ParametricHmm> AliveEstimator<F> {
    pub fn new(hmm: AbcHmm<F>, opts: FilterOptions) -> Self {
        AliveEstimator { hmm, opts, keep_trajectory: true }
    }
}

type LatentOf<F> = <<F as ParametricHmm>::Dynamics as LatentObsModel>::Latent;

impl<F> LikelihoodEstimator for AliveEstimator<F>
where
    F: ParametricHmm,
    F::Dynamics: Sync,
    LatentOf<F>: Sync,
{
    type Path = AbcState<LatentOf<F>>;

    fn dim(&self) -> usize {
        self.hmm.family.dim()
    }

    fn estimate(&self, theta: &[f64], seed: u64) -> Result<Estimate<Self::Path>, EstimateFailure> {
        let model = compile_abc_hmm(&self.hmm, theta).map_err(|_| EstimateFailure::OutOfDomain)?;
        let mut rng = seeded_rng(seed);
        let run = match run_filter_with(&model, &self.opts, &mut rng) {
            Ok(run) => run,
            Err(aborted) => {
                let trials = match aborted.error {
                    FilterError::CapExceeded { trials, .. } => trials,
                    _ => 0,
                };
                return Err(EstimateFailure::CapExceeded { trials: aborted.partial.total_trials() + trials });
            }
        };
        debug_assert_eq!(run.horizon(), model.horizon());
        let trajectory = if self.keep_trajectory {
            let leaf = sample_leaf(run.final_step(), &mut rng);
            Some(ancestral_path(&run, leaf).expect("sampled leaf is eligible and retained"))
        } else {
            None
        };
        Ok(Estimate { log_gamma: run.log_evidence(), trajectory, trials: run.total_trials() })
    }
}

/// Noise-free estimator returning a supplied log likelihood; turns the
/// sampler into plain Metropolis-Hastings.
pub struct ExactLikelihood<L> {
    pub dim: usize,
    pub log_likelihood: L,
}

impl<L: Fn(&[f64]) -> f64 + Sync> LikelihoodEstimator for ExactLikelihood<L> {
    type Path = ();

    fn dim(&self) -> usize {
        self.dim
    }

    fn estimate(&self, theta: &[f64], _seed: u64) -> Result<Estimate<()>, EstimateFailure> {
        Ok(Estimate { log_gamma: (self.log_likelihood)(theta), trajectory: None, trials: 0 })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState<P> {
    pub theta: Vec<f64>,
    /// Estimate produced by the run that also produced `trajectory`.
    pub log_gamma_hat: f64,
    pub trajectory: Option<Trajectory<P>>,
    /// Seed of that run.
    pub filter_seed: u64,
    pub iteration: usize,
    pub accepted: usize,
}

/// What happened in one [`pmmh_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub proposal: Vec<f64>,
    pub accepted: bool,
    /// The proposal's filter hit its trial cap (counted as a rejection).
    pub cap_exceeded: bool,
    /// Draws spent by the proposal's estimator.
    pub trials: usize,
    /// `log` acceptance ratio; `-inf` when rejected before filtering.
    pub log_ratio: f64,
}

/// Draw `theta(0)` from the prior until the estimator succeeds, at most
/// `max_attempts` times.
pub fn pmmh_init<E: LikelihoodEstimator, R: Rng + ?Sized>(
    estimator: &E,
    priors: &PriorSpec,
    max_attempts: usize,
    rng: &mut R,
) -> Result<ChainState<E::Path>, PmmhError> {
    priors.validate()?;
    if priors.dim() != estimator.dim() {
        return Err(PmmhError::InvalidConfig(format!(
            "prior has {} coordinates, model has {}",
            priors.dim(),
            estimator.dim()
        )));
    }
    for _ in 0..max_attempts {
        let theta = priors.sample(rng);
        let filter_seed: u64 = rng.random();
        if let Ok(est) = estimator.estimate(&theta, filter_seed) {
            return Ok(ChainState {
                theta,
                log_gamma_hat: est.log_gamma,
                trajectory: est.trajectory,
                filter_seed,
                iteration: 0,
                accepted: 0,
            });
        }
    }
    Err(PmmhError::InitFailed { attempts: max_attempts })
}

/// One Metropolis-Hastings update of `state`.
pub fn pmmh_step<E: LikelihoodEstimator, R: Rng + ?Sized>(
    state: &mut ChainState<E::Path>,
    proposals: &ProposalSpec,
    priors: &PriorSpec,
    estimator: &E,
    rng: &mut R,
) -> StepReport {
    state.iteration += 1;
    let proposal = proposals.sample(&state.theta, rng);
    let filter_seed: u64 = rng.random();
    let u: f64 = rng.random();
    let mut report =
        StepReport { proposal, accepted: false, cap_exceeded: false, trials: 0, log_ratio: f64::NEG_INFINITY };

    let lp_new = log_prior_density(&report.proposal, priors);
    if lp_new == f64::NEG_INFINITY {
        return report;
    }
    let est = match estimator.estimate(&report.proposal, filter_seed) {
        Ok(est) => est,
        Err(EstimateFailure::CapExceeded { trials }) => {
            report.cap_exceeded = true;
            report.trials = trials;
            return report;
        }
        Err(EstimateFailure::OutOfDomain) => return report,
    };
    report.trials = est.trials;
    let lp_old = log_prior_density(&state.theta, priors);
    // pairwise differences so equal terms cancel exactly
    report.log_ratio = (est.log_gamma - state.log_gamma_hat)
        + (lp_new - lp_old)
        + (proposals.log_density(&report.proposal, &state.theta)
            - proposals.log_density(&state.theta, &report.proposal));
    if u.ln() < report.log_ratio {
        report.accepted = true;
        state.theta.clone_from(&report.proposal);
        state.log_gamma_hat = est.log_gamma;
        state.trajectory = est.trajectory;
        state.filter_seed = filter_seed;
        state.accepted += 1;
    }
    report
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub priors: PriorSpec,
    pub proposals: ProposalSpec,
    pub iterations: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thinning: usize,
    pub seed: u64,
    #[serde(default = "default_attempts")]
    pub max_init_attempts: usize,
}

fn one() -> usize {
    1
}

fn default_attempts() -> usize {
    DEFAULT_INIT_ATTEMPTS
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub log_gamma_hat: f64,
    pub accepted: bool,
    /// Draws spent on this iteration's proposal.
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainRecord<P> {
    /// State after initialization (iteration 0).
    pub initial: TraceRow,
    /// Rows kept after burn-in and thinning.
    pub trace: Vec<TraceRow>,
    pub final_state: ChainState<P>,
    pub iterations: usize,
    pub accepted: usize,
    pub cap_events: usize,
    pub total_trials: usize,
}

impl<P> ChainRecord<P> {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.iterations as f64
    }

    pub fn mean_trials_per_iteration(&self) -> f64 {
        self.total_trials as f64 / self.iterations as f64
    }
}

/// Run a chain for `config.iterations` updates.
pub fn run_chain<E: LikelihoodEstimator>(
    config: &ChainConfig,
    estimator: &E,
) -> Result<ChainRecord<E::Path>, PmmhError> {
    if config.iterations == 0 || config.thinning == 0 {
        return Err(PmmhError::InvalidConfig("iterations and thinning must be at least 1".into()));
    }
    config.proposals.validate()?;
    if config.proposals.0.len() != config.priors.dim() {
        return Err(PmmhError::InvalidConfig("one proposal per coordinate is required".into()));
    }
    let mut rng = seeded_rng(config.seed);
    let mut state = pmmh_init(estimator, &config.priors, config.max_init_attempts, &mut rng)?;
    let initial = TraceRow {
        iteration: 0,
        theta: state.theta.clone(),
        log_gamma_hat: state.log_gamma_hat,
        accepted: true,
        trials: 0,
    };
    let mut trace = Vec::with_capacity((config.iterations.saturating_sub(config.burn_in)) / config.thinning + 1);
    let mut cap_events = 0;
    let mut total_trials = 0;
    for _ in 0..config.iterations {
        let report = pmmh_step(&mut state, &config.proposals, &config.priors, estimator, &mut rng);
        cap_events += report.cap_exceeded as usize;
        total_trials += report.trials;
        let it = state.iteration;
        if it > config.burn_in && (it - config.burn_in).is_multiple_of(config.thinning) {
            trace.push(TraceRow {
                iteration: it,
                theta: state.theta.clone(),
                log_gamma_hat: state.log_gamma_hat,
                accepted: report.accepted,
                trials: report.trials,
            });
        }
    }
    Ok(ChainRecord {
        initial,
        trace,
        iterations: config.iterations,
        accepted: state.accepted,
        cap_events,
        total_trials,
        final_state: state,
    })
}
