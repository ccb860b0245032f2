//! Experiment configuration.
//!
//! A config file only needs the keys it changes: it is merged over the
//! defaults for its `experiment` id before being parsed, so the resolved
//! config (echoed in every manifest) is always complete.

use std::path::{Path, PathBuf};

use alive_smc::models::{StableParams, DEFAULT_OUTLIER_LEVELS};
use alive_smc::pmmh::{Prior, PriorSpec, Proposal, ProposalSpec};
use alive_smc::{Variant, DEFAULT_TRIAL_CAP};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    LgFilteringPart1,
    LgFilteringPart2,
    NcVariance,
    PmmhSv,
    PmmhLgValidation,
    Identities,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::LgFilteringPart1,
        ExperimentId::LgFilteringPart2,
        ExperimentId::NcVariance,
        ExperimentId::PmmhSv,
        ExperimentId::PmmhLgValidation,
        ExperimentId::Identities,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::LgFilteringPart1 => "lg_filtering_part1",
            ExperimentId::LgFilteringPart2 => "lg_filtering_part2",
            ExperimentId::NcVariance => "nc_variance",
            ExperimentId::PmmhSv => "pmmh_sv",
            ExperimentId::PmmhLgValidation => "pmmh_lg_validation",
            ExperimentId::Identities => "identities",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.as_str() == s)
    }
}

/// One linear-Gaussian setting and its ABC ball radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub sigma_v2: f64,
    pub sigma_w2: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierConfig {
    pub probability: f64,
    pub levels: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LgSection {
    pub scenarios: Vec<Scenario>,
    /// Particles of the bootstrap filter.
    pub n_standard: usize,
    pub outliers: Option<OutlierConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IidSection {
    pub p0: f64,
    pub horizons: Vec<usize>,
    /// `N = ceil(n_factor * n / p0)`.
    pub n_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitySection {
    pub ps: Vec<f64>,
    pub ns: Vec<usize>,
    pub pair_ps: Vec<f64>,
    pub pair_ns: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvSection {
    pub noise: StableParams,
    /// `(beta, c, phi)` used to simulate data when no data file is given.
    pub truth: Vec<f64>,
    pub z0: f64,
    /// CSV of index levels; log-returns are used as observations.
    pub data_path: Option<PathBuf>,
    pub epsilon: f64,
    pub priors: PriorSpec,
    pub proposals: ProposalSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LgValidationSection {
    pub sigma_w2: f64,
    /// Support of the `sigma_v2` prior.
    pub grid: Vec<f64>,
    pub prior_weights: Vec<f64>,
    /// `sigma_v2` used to simulate the data.
    pub truth: f64,
    pub epsilon: f64,
    /// One chain per value.
    pub n_alive_values: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seed: u64,
    /// Not part of the config hash.
    pub out_dir: PathBuf,
    pub horizon: usize,
    pub replicates: usize,
    pub n_alive: usize,
    pub trial_cap: usize,
    pub variant: Variant,
    pub lg: LgSection,
    pub iid: IidSection,
    pub identities: IdentitySection,
    pub sv: SvSection,
    pub lg_validation: LgValidationSection,
    pub chain: ChainSection,
}

pub const DEFAULT_SEED: u64 = 42;

fn paired(eps: [f64; 3]) -> Vec<Scenario> {
    [(0.1, 0.1), (1.0, 1.0), (5.0, 5.0)]
        .iter()
        .zip(eps)
        .map(|(&(sigma_v2, sigma_w2), epsilon)| Scenario { sigma_v2, sigma_w2, epsilon })
        .collect()
}

impl ExperimentConfig {
    pub fn defaults(id: ExperimentId) -> Self {
        let mut cfg = ExperimentConfig {
            experiment: id,
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("out").join(id.as_str()),
            horizon: 500,
            replicates: 50,
            n_alive: 1500,
            trial_cap: DEFAULT_TRIAL_CAP,
            variant: Variant::Alive,
            lg: LgSection {
                scenarios: paired([5.0, 10.0, 15.0]),
                n_standard: 2000,
                outliers: Some(OutlierConfig { probability: 1.0 / 500.0, levels: DEFAULT_OUTLIER_LEVELS.to_vec() }),
            },
            iid: IidSection { p0: 0.5, horizons: vec![5, 10, 20], n_factor: 10.0 },
            identities: IdentitySection {
                ps: vec![0.2, 0.5, 0.8],
                ns: vec![2, 5, 20],
                pair_ps: vec![0.3, 0.5],
                pair_ns: vec![3, 10],
            },
            sv: SvSection {
                noise: StableParams { scale: 1.0, skew: 1.0, alpha: 1.75 },
                truth: vec![0.01, 0.01, 0.02],
                z0: 0.0,
                data_path: None,
                epsilon: 0.1,
                priors: PriorSpec(vec![
                    Prior::Normal { mean: 0.0, variance: 10.0 },
                    Prior::InverseGamma { shape: 2.0, scale: 0.01 },
                    Prior::InverseGamma { shape: 2.0, scale: 0.02 },
                ]),
                proposals: ProposalSpec(vec![
                    Proposal::RandomWalkNormal { variance: 1e-4 },
                    Proposal::GammaCentered { variance: 1e-5 },
                    Proposal::GammaCentered { variance: 1e-4 },
                ]),
            },
            lg_validation: LgValidationSection {
                sigma_w2: 1.0,
                grid: vec![0.25, 0.5, 1.0, 2.0, 4.0],
                prior_weights: vec![1.0; 5],
                truth: 1.0,
                epsilon: 1.0,
                n_alive_values: vec![2, 20],
            },
            chain: ChainSection { iterations: 2000, burn_in: 0, thinning: 1 },
        };
        match id {
            ExperimentId::LgFilteringPart1 => {}
            ExperimentId::LgFilteringPart2 => cfg.lg.scenarios = paired([3.0, 6.0, 12.0]),
            ExperimentId::NcVariance => cfg.replicates = 10_000,
            ExperimentId::Identities => cfg.replicates = 1_000_000,
            ExperimentId::PmmhSv => {
                cfg.horizon = 200;
                cfg.n_alive = 100;
                // a run far from the posterior should fail fast, not stall
                cfg.trial_cap = 5_000;
            }
            ExperimentId::PmmhLgValidation => {
                cfg.horizon = 3;
                cfg.chain.iterations = 20_000;
            }
        }
        cfg
    }

    /// Parse a JSON document, filling unspecified keys from the defaults of
    /// its `experiment` (or of `fallback` when the document has none).
    pub fn from_json(text: &str, fallback: Option<ExperimentId>) -> Result<Self, CliError> {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        // a manifest carries the full config it was produced from
        if doc.get("config_hash").is_some() {
            if let Some(inner) = doc.get_mut("config").map(Value::take) {
                doc = inner;
            }
        }
        let id = match doc.get("experiment") {
            Some(Value::String(s)) => {
                ExperimentId::parse(s).ok_or_else(|| CliError::Config(format!("unknown experiment id `{s}`")))?
            }
            Some(other) => return Err(CliError::Config(format!("experiment must be a string, got {other}"))),
            None => fallback.ok_or_else(|| CliError::Config("config does not name an experiment".into()))?,
        };
        let mut merged = serde_json::to_value(Self::defaults(id)).expect("defaults serialize");
        merge(&mut merged, doc);
        let cfg: Self = serde_json::from_value(merged).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, fallback: Option<ExperimentId>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, fallback)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.replicates < 1 {
            return bad("replicates must be at least 1".into());
        }
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if self.n_alive < 2 || self.trial_cap < self.n_alive {
            return bad(format!(
                "need n_alive >= 2 and trial_cap >= n_alive (got {} and {})",
                self.n_alive, self.trial_cap
            ));
        }
        if self.lg.n_standard < 1 {
            return bad("n_standard must be at least 1".into());
        }
        for s in &self.lg.scenarios {
            if !(s.sigma_v2 > 0.0 && s.sigma_w2 > 0.0 && s.epsilon > 0.0) {
                return bad(format!("scenario {s:?} needs positive variances and epsilon"));
            }
        }
        if let Some(o) = &self.lg.outliers {
            if !(o.probability > 0.0 && o.probability < 1.0) || o.levels.is_empty() {
                return bad("outlier probability must lie in (0, 1) with at least one level".into());
            }
        }
        if !(self.iid.p0 > 0.0 && self.iid.p0 < 1.0) || !(self.iid.n_factor > 0.0) || self.iid.horizons.contains(&0) {
            return bad("iid section needs p0 in (0, 1), n_factor > 0 and positive horizons".into());
        }
        let id = &self.identities;
        if id.ps.iter().chain(&id.pair_ps).any(|&p| !(p > 0.0 && p <= 1.0))
            || id.ns.iter().any(|&n| n < 2)
            || id.pair_ns.iter().any(|&n| n < 3)
        {
            return bad("identity grid needs p in (0, 1], N >= 2 (N >= 3 for pairs)".into());
        }
        if self.sv.truth.len() != 3 || self.sv.priors.dim() != 3 || self.sv.proposals.0.len() != 3 {
            return bad("stochastic-volatility theta has three coordinates (beta, c, phi)".into());
        }
        if !(self.sv.epsilon > 0.0) {
            return bad("sv epsilon must be positive".into());
        }
        self.sv.noise.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.sv.priors.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.sv.proposals.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let v = &self.lg_validation;
        if v.grid.is_empty() || v.grid.len() != v.prior_weights.len() || v.grid.iter().any(|&g| !(g > 0.0)) {
            return bad("lg_validation grid must be non-empty, positive and matched by prior weights".into());
        }
        if v.prior_weights.iter().any(|&w| !(w > 0.0)) || !(v.epsilon > 0.0) || !(v.sigma_w2 > 0.0) || !(v.truth > 0.0)
        {
            return bad("lg_validation needs positive weights, epsilon, sigma_w2 and truth".into());
        }
        if v.n_alive_values.iter().any(|&n| n < 2 || n > self.trial_cap) {
            return bad("lg_validation n_alive_values must lie in [2, trial_cap]".into());
        }
        if self.chain.iterations < 1 || self.chain.thinning < 1 {
            return bad("chain iterations and thinning must be at least 1".into());
        }
        Ok(())
    }

    /// SHA-256 of the resolved config without `out_dir`, hex, first 16
    /// characters.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("out_dir");
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}
