//! The experiment families.
//!
//! Replicates run in parallel; each one gets a seed derived from the run
//! seed, its stream and its index, and results are collected in index order,
//! so outputs do not depend on scheduling.

use std::collections::BTreeMap;
use std::time::Instant;

use alive_smc::models::UniformIidModel;
use alive_smc::models::{
    compile_abc_hmm, inject_outliers, lg_simulate, load_returns_csv, sv_simulate, AbcHmm, AbcModel, LgFamily, LgParam,
    LinearGaussianParams, StableSvParams, SvFamily,
};
use alive_smc::oracles::{
    grid_abc_posterior, kalman_filter, nb_identity_exact, nb_identity_mc, nb_pair_identity_exact, nb_pair_identity_mc,
    GridOptions, KalmanOutput, McEstimate,
};
use alive_smc::pmmh::{run_chain, AliveEstimator, ChainConfig, ChainRecord, Prior, PriorSpec, Proposal, ProposalSpec};
use alive_smc::stats::mean_se;
use alive_smc::{
    filter_estimate, run_filter, run_standard_filter, FilterError, FilterOptions, FilterRun, TestFunction, Variant,
    RNG_NAME,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentId, Scenario};
use crate::output::{fmt_f64, fmt_opt, RunStamp, Table};
use crate::report::{derive_seed, relative_variance_report};
use crate::CliError;

const STREAM_DATA: u64 = 1;
const STREAM_OUTLIERS: u64 = 2;
const STREAM_ALIVE: u64 = 3;
const STREAM_STANDARD: u64 = 4;
const STREAM_IID: u64 = 5;
const STREAM_IDENTITY: u64 = 6;
const STREAM_CHAIN: u64 = 7;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CollapseEvent {
    pub scenario: usize,
    pub replicate: usize,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CapEvent {
    pub scenario: usize,
    pub replicate: usize,
    pub step: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub experiment: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub rng: &'static str,
    pub config: ExperimentConfig,
    pub files: Vec<String>,
    pub wall_time_secs: f64,
    pub collapse_events: Vec<CollapseEvent>,
    pub cap_events: Vec<CapEvent>,
    pub summary: Value,
}

#[derive(Default)]
struct Output {
    tables: Vec<Table>,
    summary: Value,
    collapse_events: Vec<CollapseEvent>,
    cap_events: Vec<CapEvent>,
}

/// Run the configured experiment and write its CSVs and `manifest.json`
/// into `config.out_dir`. Per-replicate failures are recorded, never fatal.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Manifest, CliError> {
    config.validate()?;
    let start = Instant::now();
    let out = match config.experiment {
        ExperimentId::LgFilteringPart1 => lg_filtering(config, false)?,
        ExperimentId::LgFilteringPart2 => lg_filtering(config, true)?,
        ExperimentId::NcVariance => nc_variance(config),
        ExperimentId::Identities => identities(config),
        ExperimentId::PmmhLgValidation => pmmh_lg_validation(config)?,
        ExperimentId::PmmhSv => pmmh_sv(config)?,
    };
    finish(config, out, start)
}

fn finish(config: &ExperimentConfig, out: Output, start: Instant) -> Result<Manifest, CliError> {
    let wall_time_secs = start.elapsed().as_secs_f64();
    let stamp = RunStamp { experiment: config.experiment.as_str(), seed: config.seed, config_hash: config.hash() };
    std::fs::create_dir_all(&config.out_dir).map_err(|e| CliError::io(&config.out_dir, e))?;
    let mut files = Vec::with_capacity(out.tables.len());
    for table in &out.tables {
        let path = table.write(&config.out_dir, &stamp)?;
        files.push(path.file_name().expect("file name").to_string_lossy().into_owned());
    }
    let manifest = Manifest {
        experiment: stamp.experiment,
        seed: config.seed,
        config_hash: stamp.config_hash,
        rng: RNG_NAME,
        config: config.clone(),
        files,
        wall_time_secs,
        collapse_events: out.collapse_events,
        cap_events: out.cap_events,
        summary: out.summary,
    };
    let path = config.out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// linear-Gaussian filtering

/// Simulated data for one scenario.
pub struct LgData {
    pub params: LinearGaussianParams,
    pub latent: Vec<f64>,
    pub observations: Vec<f64>,
    pub outlier_indices: Vec<usize>,
    /// Exact filter on the observed data: the `eps = 0` reference.
    pub kalman: KalmanOutput,
}

pub fn lg_data(config: &ExperimentConfig, scenario: &Scenario, index: usize) -> Result<LgData, CliError> {
    let params =
        LinearGaussianParams::new(scenario.sigma_v2, scenario.sigma_w2).map_err(|e| CliError::Config(e.to_string()))?;
    let (latent, clean) = lg_simulate(&params, config.horizon, derive_seed(config.seed, STREAM_DATA, index as u64));
    let (observations, outlier_indices) = match &config.lg.outliers {
        Some(o) => {
            let inj = inject_outliers(
                &clean,
                o.probability,
                &o.levels,
                derive_seed(config.seed, STREAM_OUTLIERS, index as u64),
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
            (inj.observations, inj.indices)
        }
        None => (clean, Vec::new()),
    };
    let kalman = kalman_filter(&params, &observations);
    Ok(LgData { params, latent, observations, outlier_indices, kalman })
}

pub fn lg_model(data: &LgData, epsilon: f64) -> Result<AbcModel<LinearGaussianParams>, CliError> {
    let hmm = AbcHmm::fixed(data.params.clone(), epsilon, data.observations.clone(), data.params.z0)
        .map_err(|e| CliError::Config(e.to_string()))?;
    compile_abc_hmm(&hmm, &[]).map_err(|e| CliError::Config(e.to_string()))
}

/// Per-step summary of one alive-filter replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct AliveReplicate {
    pub seed: u64,
    pub means: Vec<f64>,
    /// `log` ABC likelihood estimate through each step, density scale.
    pub log_nc: Vec<f64>,
    pub trials: Vec<usize>,
    /// `(step, trials)` if the trial cap stopped the run.
    pub failure: Option<(usize, usize)>,
}

/// Per-step summary of one bootstrap replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardReplicate {
    pub seed: u64,
    /// Up to the last step with an alive particle.
    pub means: Vec<f64>,
    pub log_nc: Vec<f64>,
    /// Including the collapse step, if any.
    pub alive: Vec<usize>,
    pub collapse: Option<usize>,
}

fn summarize_alive(
    run: &FilterRun<alive_smc::models::AbcState<f64>>,
    seed: u64,
    eps: f64,
    failure: Option<(usize, usize)>,
) -> AliveReplicate {
    let phi = TestFunction::new(|x: &alive_smc::models::AbcState<f64>| x.z);
    let n = run.n_alive as f64;
    let log_ball = (2.0 * eps).ln();
    let mut acc = 0.0;
    let mut log_nc = Vec::with_capacity(run.steps.len());
    for step in &run.steps {
        acc += (n - 1.0).ln() - ((step.stopping_time() - 1) as f64).ln() - log_ball;
        log_nc.push(acc);
    }
    AliveReplicate {
        seed,
        means: run.steps.iter().map(|s| filter_estimate(s, &phi)).collect(),
        log_nc,
        trials: run.stopping_times(),
        failure,
    }
}

pub fn alive_replicate(model: &AbcModel<LinearGaussianParams>, opts: &FilterOptions, seed: u64) -> AliveReplicate {
    let eps = model.epsilon();
    match run_filter(model, opts, seed) {
        Ok(run) => summarize_alive(&run, seed, eps, None),
        Err(aborted) => {
            let failure = match aborted.error {
                FilterError::CapExceeded { step, trials } => Some((step, trials)),
                ref other => panic!("filter configuration rejected: {other}"),
            };
            summarize_alive(&aborted.partial, seed, eps, failure)
        }
    }
}

pub fn standard_replicate(model: &AbcModel<LinearGaussianParams>, n: usize, seed: u64) -> StandardReplicate {
    let phi = TestFunction::new(|x: &alive_smc::models::AbcState<f64>| x.z);
    let run = run_standard_filter(model, n, seed);
    let log_ball = (2.0 * model.epsilon()).ln();
    let mut acc = 0.0;
    let mut means = Vec::new();
    let mut log_nc = Vec::new();
    for step in run.steps.iter().filter(|s| s.alive_count > 0) {
        acc += step.alive_fraction().ln() - log_ball;
        log_nc.push(acc);
        means.push(step.filter_estimate(&phi).expect("alive step"));
    }
    StandardReplicate { seed, means, log_nc, alive: run.alive_counts(), collapse: run.collapse.map(|c| c.step) }
}

fn mean_of(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut k) = (0.0, 0usize);
    for x in xs {
        s += x;
        k += 1;
    }
    (k > 0).then(|| s / k as f64)
}

/// Mean L1 error against the Kalman filtered mean at each step.
fn l1_series(means: &[&[f64]], kalman: &[f64]) -> Vec<(Option<f64>, usize)> {
    kalman
        .iter()
        .enumerate()
        .map(|(t, &k)| {
            let avail: Vec<f64> = means.iter().filter_map(|m| m.get(t)).map(|&m| (m - k).abs()).collect();
            (mean_of(avail.iter().copied()), avail.len())
        })
        .collect()
}

fn lg_filtering(config: &ExperimentConfig, part_two: bool) -> Result<Output, CliError> {
    let mut out = Output::default();
    let mut summaries = Vec::new();
    let opts = FilterOptions::new(config.n_alive).with_cap(config.trial_cap).with_variant(config.variant).lean(true);
    for (k, scenario) in config.lg.scenarios.iter().enumerate() {
        let label = k + 1;
        let data = lg_data(config, scenario, k)?;
        let model = lg_model(&data, scenario.epsilon)?;
        let alive_stream = STREAM_ALIVE + 16 * k as u64;
        let std_stream = STREAM_STANDARD + 16 * k as u64;
        let alive: Vec<AliveReplicate> = (0..config.replicates)
            .into_par_iter()
            .map(|r| alive_replicate(&model, &opts, derive_seed(config.seed, alive_stream, r as u64)))
            .collect();
        let standard: Vec<StandardReplicate> = (0..config.replicates)
            .into_par_iter()
            .map(|r| standard_replicate(&model, config.lg.n_standard, derive_seed(config.seed, std_stream, r as u64)))
            .collect();
        for (r, rep) in alive.iter().enumerate() {
            if let Some((step, trials)) = rep.failure {
                out.cap_events.push(CapEvent { scenario: label, replicate: r, step, trials });
            }
        }
        for (r, rep) in standard.iter().enumerate() {
            if let Some(step) = rep.collapse {
                out.collapse_events.push(CollapseEvent { scenario: label, replicate: r, step });
            }
        }

        let horizon = config.horizon;
        let kalman = &data.kalman;
        let alive_means: Vec<&[f64]> = alive.iter().map(|a| a.means.as_slice()).collect();
        let std_means: Vec<&[f64]> = standard.iter().map(|s| s.means.as_slice()).collect();
        let alive_l1 = l1_series(&alive_means, &kalman.filtered_mean);
        let std_l1 = l1_series(&std_means, &kalman.filtered_mean);

        let mut ratio = Table::new(
            format!("{}_s{label}", if part_two { "fig8" } else { "fig1" }),
            &["time", "alive_l1", "standard_l1", "log_ratio", "alive_available", "standard_available"],
        );
        let mut ratios = Vec::new();
        for t in 0..horizon {
            let lr = match (alive_l1[t].0, std_l1[t].0) {
                (Some(a), Some(s)) if a > 0.0 && s > 0.0 => Some((a / s).ln()),
                _ => None,
            };
            ratios.extend(lr);
            ratio.push(vec![
                (t + 1).to_string(),
                fmt_opt(alive_l1[t].0),
                fmt_opt(std_l1[t].0),
                fmt_opt(lr),
                alive_l1[t].1.to_string(),
                std_l1[t].1.to_string(),
            ]);
        }

        let mut trials =
            Table::new(format!("fig5_s{label}"), &["time", "mean_trials", "min_trials", "max_trials", "available"]);
        let mut counts =
            Table::new(format!("fig6_s{label}"), &["time", "mean_alive", "min_alive", "max_alive", "available"]);
        for t in 0..horizon {
            let ts: Vec<usize> = alive.iter().filter_map(|a| a.trials.get(t).copied()).collect();
            let cs: Vec<usize> = standard.iter().filter_map(|s| s.alive.get(t).copied()).collect();
            for (table, xs) in [(&mut trials, &ts), (&mut counts, &cs)] {
                table.push(vec![
                    (t + 1).to_string(),
                    fmt_opt(mean_of(xs.iter().map(|&x| x as f64))),
                    xs.iter().min().map(|x| x.to_string()).unwrap_or_default(),
                    xs.iter().max().map(|x| x.to_string()).unwrap_or_default(),
                    xs.len().to_string(),
                ]);
            }
        }

        let mut runs = Table::new(
            format!("runs_s{label}"),
            &[
                "replicate",
                "alive_seed",
                "alive_completed_steps",
                "alive_cap_step",
                "standard_seed",
                "standard_collapse_step",
            ],
        );
        for (r, (a, s)) in alive.iter().zip(&standard).enumerate() {
            runs.push(vec![
                r.to_string(),
                a.seed.to_string(),
                a.means.len().to_string(),
                a.failure.map(|f| f.0.to_string()).unwrap_or_default(),
                s.seed.to_string(),
                s.collapse.map(|c| c.to_string()).unwrap_or_default(),
            ]);
        }

        if part_two {
            let mut traj = Table::new(
                format!("fig7_s{label}"),
                &["time", "true_z", "observation", "kalman_mean", "alive_mean", "standard_mean"],
            );
            for t in 0..horizon {
                traj.push(vec![
                    (t + 1).to_string(),
                    fmt_f64(data.latent[t]),
                    fmt_f64(data.observations[t]),
                    fmt_f64(kalman.filtered_mean[t]),
                    fmt_opt(alive.first().and_then(|a| a.means.get(t).copied())),
                    fmt_opt(standard.first().and_then(|s| s.means.get(t).copied())),
                ]);
            }
            out.tables.push(traj);
        } else {
            let mut err = Table::new(format!("fig2_s{label}"), &["time", "alive_l1", "outlier"]);
            let mut nc = Table::new(
                format!("fig3_s{label}"),
                &["time", "eps0_reference_log_nc", "alive_log_nc", "standard_log_nc"],
            );
            let mut relvar =
                Table::new(format!("fig4_s{label}"), &["time", "log_relative_variance", "jackknife_se", "replicates"]);
            let alive_nc: Vec<Vec<f64>> = alive.iter().map(|a| a.log_nc.clone()).collect();
            let report = relative_variance_report(&alive_nc, &kalman.cumulative_log_likelihood);
            for t in 0..horizon {
                err.push(vec![
                    (t + 1).to_string(),
                    fmt_opt(alive_l1[t].0),
                    u8::from(data.outlier_indices.binary_search(&t).is_ok()).to_string(),
                ]);
                nc.push(vec![
                    (t + 1).to_string(),
                    fmt_f64(kalman.cumulative_log_likelihood[t]),
                    fmt_opt(mean_of(alive.iter().filter_map(|a| a.log_nc.get(t).copied()))),
                    fmt_opt(mean_of(standard.iter().filter_map(|s| s.log_nc.get(t).copied()))),
                ]);
                let p = &report[t];
                relvar.push(vec![
                    (t + 1).to_string(),
                    fmt_opt(p.log_rel_var),
                    fmt_opt(p.log_rel_var_se),
                    p.count.to_string(),
                ]);
            }
            out.tables.extend([err, nc, relvar]);
        }
        out.tables.extend([ratio, trials, counts, runs]);

        summaries.push(json!({
            "scenario": label,
            "sigma_v2": scenario.sigma_v2,
            "sigma_w2": scenario.sigma_w2,
            "epsilon": scenario.epsilon,
            "outlier_indices": data.outlier_indices,
            "alive_completed": alive.iter().filter(|a| a.failure.is_none()).count(),
            "standard_collapsed": standard.iter().filter(|s| s.collapse.is_some()).count(),
            "mean_log_l1_ratio": mean_of(ratios.iter().copied()),
        }));
    }
    out.summary = json!({ "replicates": config.replicates, "scenarios": summaries });
    Ok(out)
}

/// Which filter a single `filter` run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterKind {
    Alive(Variant),
    Standard,
}

/// One filter run on the first scenario's data. Unlike the batch
/// experiments, a capped alive run is an error here (after the partial
/// output has been written).
pub fn run_single_filter(config: &ExperimentConfig, kind: FilterKind) -> Result<Manifest, CliError> {
    config.validate()?;
    let start = Instant::now();
    let scenario = config.lg.scenarios.first().ok_or_else(|| CliError::Config("no scenario configured".into()))?;
    let data = lg_data(config, scenario, 0)?;
    let model = lg_model(&data, scenario.epsilon)?;
    let mut table = Table::new("filter", &["time", "observation", "kalman_mean", "filter_mean", "count", "log_nc"]);
    let mut out = Output::default();
    let (means, counts, log_nc) = match kind {
        FilterKind::Alive(variant) => {
            let opts = FilterOptions::new(config.n_alive).with_cap(config.trial_cap).with_variant(variant).lean(true);
            let rep = alive_replicate(&model, &opts, derive_seed(config.seed, STREAM_ALIVE, 0));
            if let Some((step, trials)) = rep.failure {
                out.cap_events.push(CapEvent { scenario: 1, replicate: 0, step, trials });
            }
            (rep.means, rep.trials, rep.log_nc)
        }
        FilterKind::Standard => {
            let rep = standard_replicate(&model, config.lg.n_standard, derive_seed(config.seed, STREAM_STANDARD, 0));
            if let Some(step) = rep.collapse {
                out.collapse_events.push(CollapseEvent { scenario: 1, replicate: 0, step });
            }
            (rep.means, rep.alive, rep.log_nc)
        }
    };
    for t in 0..config.horizon {
        table.push(vec![
            (t + 1).to_string(),
            fmt_f64(data.observations[t]),
            fmt_f64(data.kalman.filtered_mean[t]),
            fmt_opt(means.get(t).copied()),
            counts.get(t).map(|c| c.to_string()).unwrap_or_default(),
            fmt_opt(log_nc.get(t).copied()),
        ]);
    }
    let kind_name = match kind {
        FilterKind::Alive(v) => v.to_string(),
        FilterKind::Standard => "standard".into(),
    };
    out.summary = json!({
        "filter": kind_name,
        "scenario": scenario,
        "completed_steps": means.len(),
        "outlier_indices": data.outlier_indices,
    });
    out.tables.push(table);
    let capped = out.cap_events.first().cloned();
    let manifest = finish(config, out, start)?;
    match capped {
        Some(c) => Err(CliError::Filter(format!("trial cap exceeded at step {} after {} trials", c.step, c.trials))),
        None => Ok(manifest),
    }
}

// ---------------------------------------------------------------------------
// normalizing-constant variance on the i.i.d. model

/// `N = ceil(n_factor * n / p0)`.
pub fn nc_particles(n_factor: f64, n: usize, p0: f64) -> usize {
    (n_factor * n as f64 / p0).ceil() as usize
}

/// Mean squared relative error `E[(gamma_hat / gamma - 1)^2]` with its
/// standard error, plus the per-step log estimates of every replicate.
pub fn iid_relative_error(
    p0: f64,
    n: usize,
    n_alive: usize,
    replicates: usize,
    seed: u64,
) -> (f64, f64, Vec<Vec<f64>>) {
    let model = UniformIidModel::new(p0, n);
    let opts = FilterOptions::new(n_alive).lean(true);
    let logs: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let run = run_filter(&model, &opts, derive_seed(seed, STREAM_IID, r as u64)).expect("iid model never caps");
            let mut acc = 0.0;
            run.stopping_times()
                .iter()
                .map(|&t| {
                    // gamma_p(1) uses the factors of steps 1..p-1
                    let here = acc;
                    acc += ((n_alive - 1) as f64).ln() - ((t - 1) as f64).ln();
                    here
                })
                .collect()
        })
        .collect();
    let target = (n as f64 - 1.0) * p0.ln();
    let sq: Vec<f64> = logs.iter().map(|l| ((l[n - 1] - target).exp() - 1.0).powi(2)).collect();
    let (m, se) = mean_se(&sq);
    (m, se, logs)
}

fn nc_variance(config: &ExperimentConfig) -> Output {
    let iid = &config.iid;
    let mut table = Table::new(
        "nc_variance",
        &["n", "N", "replicates", "relative_mse", "relative_mse_se", "log_relative_variance", "jackknife_se"],
    );
    let mut rows = Vec::new();
    let mut largest = None;
    for (i, &n) in iid.horizons.iter().enumerate() {
        let big_n = nc_particles(iid.n_factor, n, iid.p0);
        let (mse, se, logs) =
            iid_relative_error(iid.p0, n, big_n, config.replicates, derive_seed(config.seed, STREAM_IID, i as u64));
        let reference: Vec<f64> = (0..n).map(|k| k as f64 * iid.p0.ln()).collect();
        let report = relative_variance_report(&logs, &reference);
        let last = &report[n - 1];
        table.push(vec![
            n.to_string(),
            big_n.to_string(),
            config.replicates.to_string(),
            fmt_f64(mse),
            fmt_f64(se),
            fmt_opt(last.log_rel_var),
            fmt_opt(last.log_rel_var_se),
        ]);
        rows.push(json!({ "n": n, "N": big_n, "relative_mse": mse, "se": se }));
        if largest.as_ref().is_none_or(|(m, _)| n > *m) {
            largest = Some((n, report));
        }
    }
    let mut out = Output::default();
    out.tables.push(table);
    if let Some((_, report)) = largest {
        let mut series = Table::new("fig4_iid", &["time", "log_relative_variance", "jackknife_se", "replicates"]);
        for p in &report {
            series.push(vec![
                p.time.to_string(),
                fmt_opt(p.log_rel_var),
                fmt_opt(p.log_rel_var_se),
                p.count.to_string(),
            ]);
        }
        out.tables.push(series);
    }
    out.summary = json!({ "p0": iid.p0, "rows": rows });
    out
}

// ---------------------------------------------------------------------------
// negative-binomial identities

/// One row of the identity table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityRow {
    pub identity: &'static str,
    pub p: f64,
    pub n: usize,
    pub mc: McEstimate,
    pub exact: f64,
}

pub fn identity_rows(config: &ExperimentConfig) -> Vec<IdentityRow> {
    let id = &config.identities;
    let mut jobs: Vec<(&'static str, f64, usize)> = Vec::new();
    for &p in &id.ps {
        for &n in &id.ns {
            jobs.push(("single", p, n));
        }
    }
    for &p in &id.pair_ps {
        for &n in &id.pair_ns {
            jobs.push(("pair", p, n));
        }
    }
    jobs.into_par_iter()
        .enumerate()
        .map(|(i, (identity, p, n))| {
            let seed = derive_seed(config.seed, STREAM_IDENTITY, i as u64);
            let (mc, exact) = match identity {
                "single" => (nb_identity_mc(p, n, config.replicates, seed), nb_identity_exact(p, n)),
                _ => (nb_pair_identity_mc(p, n, config.replicates, seed), nb_pair_identity_exact(p, n)),
            };
            IdentityRow { identity, p, n, mc, exact }
        })
        .collect()
}

fn identities(config: &ExperimentConfig) -> Output {
    let rows = identity_rows(config);
    let mut table = Table::new(
        "identities",
        &["identity", "p", "N", "replicates", "mc_mean", "std_error", "target", "exact", "z_score"],
    );
    for r in &rows {
        table.push(vec![
            r.identity.to_string(),
            fmt_f64(r.p),
            r.n.to_string(),
            r.mc.replicates.to_string(),
            fmt_f64(r.mc.mean),
            fmt_f64(r.mc.std_error),
            fmt_f64(r.mc.target),
            fmt_f64(r.exact),
            fmt_f64(r.mc.z_score()),
        ]);
    }
    let max_z = rows.iter().map(|r| r.mc.z_score()).fold(0.0, f64::max);
    Output { tables: vec![table], summary: json!({ "rows": rows.len(), "max_z_score": max_z }), ..Output::default() }
}

// ---------------------------------------------------------------------------
// PMMH

fn trace_table<P>(family: String, names: &[&str], record: &ChainRecord<P>) -> Table {
    let mut header = vec!["iteration"];
    header.extend_from_slice(names);
    header.extend_from_slice(&["log_gamma_hat", "accepted", "trials"]);
    let mut table = Table::new(family, &header);
    for row in std::iter::once(&record.initial).chain(&record.trace) {
        let mut cells = vec![row.iteration.to_string()];
        cells.extend(row.theta.iter().map(|&x| fmt_f64(x)));
        cells.extend([fmt_f64(row.log_gamma_hat), u8::from(row.accepted).to_string(), row.trials.to_string()]);
        table.push(cells);
    }
    table
}

/// Number of distinct parameter values the chain moved to.
pub fn distinct_accepted<P>(record: &ChainRecord<P>) -> usize {
    let mut seen: Vec<Vec<u64>> =
        record.trace.iter().filter(|r| r.accepted).map(|r| r.theta.iter().map(|x| x.to_bits()).collect()).collect();
    seen.sort();
    seen.dedup();
    seen.len()
}

/// Simulated (or loaded) observations and the latent path when simulated.
pub fn sv_data(config: &ExperimentConfig) -> Result<(Vec<f64>, Option<Vec<f64>>), CliError> {
    let sv = &config.sv;
    match &sv.data_path {
        Some(path) => {
            let mut obs = load_returns_csv(path).map_err(|e| CliError::Config(e.to_string()))?;
            obs.truncate(config.horizon);
            Ok((obs, None))
        }
        None => {
            let truth = StableSvParams::new(sv.truth[0], sv.truth[1], sv.truth[2], sv.noise)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let (z, y) = sv_simulate(&truth, config.horizon, sv.z0, derive_seed(config.seed, STREAM_DATA, 0));
            Ok((y, Some(z)))
        }
    }
}

/// A stochastic-volatility chain with the data it ran on.
pub struct SvRun {
    pub record: ChainRecord<alive_smc::models::AbcState<f64>>,
    pub observations: Vec<f64>,
    /// Present when the data were simulated.
    pub latent: Option<Vec<f64>>,
}

pub fn sv_chain(config: &ExperimentConfig) -> Result<SvRun, CliError> {
    let sv = &config.sv;
    let (obs, latent) = sv_data(config)?;
    let hmm = AbcHmm::new(SvFamily { noise: sv.noise }, sv.epsilon, obs.clone(), sv.z0)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let opts = FilterOptions::new(config.n_alive).with_cap(config.trial_cap).with_variant(config.variant).lean(true);
    let estimator = AliveEstimator::new(hmm, opts);
    let chain = ChainConfig {
        priors: sv.priors.clone(),
        proposals: sv.proposals.clone(),
        iterations: config.chain.iterations,
        burn_in: config.chain.burn_in,
        thinning: config.chain.thinning,
        seed: derive_seed(config.seed, STREAM_CHAIN, 0),
        max_init_attempts: alive_smc::pmmh::DEFAULT_INIT_ATTEMPTS,
    };
    let record = run_chain(&chain, &estimator)?;
    Ok(SvRun { record, observations: obs, latent })
}

fn pmmh_sv(config: &ExperimentConfig) -> Result<Output, CliError> {
    let SvRun { record, observations: obs, latent } = sv_chain(config)?;
    let mut data = Table::new("data", &["time", "observation", "latent"]);
    for (t, y) in obs.iter().enumerate() {
        data.push(vec![(t + 1).to_string(), fmt_f64(*y), fmt_opt(latent.as_ref().map(|z| z[t]))]);
    }
    let trace = trace_table("trace".into(), &["beta", "c", "phi"], &record);
    let summary = json!({
        "iterations": record.iterations,
        "acceptance_rate": record.acceptance_rate(),
        "distinct_accepted": distinct_accepted(&record),
        "cap_events": record.cap_events,
        "mean_trials_per_iteration": record.mean_trials_per_iteration(),
        "initial_theta": record.initial.theta,
        "horizon": obs.len(),
    });
    Ok(Output { tables: vec![data, trace], summary, ..Output::default() })
}

/// Result of the tiny linear-Gaussian validation for one `N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationChain {
    pub n_alive: usize,
    pub frequencies: Vec<f64>,
    pub total_variation: f64,
    pub acceptance_rate: f64,
    pub cap_events: usize,
}

pub struct Validation {
    pub observations: Vec<f64>,
    pub posterior: Vec<f64>,
    pub chains: Vec<(ValidationChain, ChainRecord<alive_smc::models::AbcState<f64>>)>,
}

pub fn lg_validation(config: &ExperimentConfig) -> Result<Validation, CliError> {
    let v = &config.lg_validation;
    let base = LinearGaussianParams::new(v.truth, v.sigma_w2).map_err(|e| CliError::Config(e.to_string()))?;
    let (_, observations) = lg_simulate(&base, config.horizon, derive_seed(config.seed, STREAM_DATA, 0));
    let family = LgFamily { base, free: vec![LgParam::SigmaV2] };
    let thetas: Vec<Vec<f64>> = v.grid.iter().map(|&g| vec![g]).collect();
    let posterior =
        grid_abc_posterior(&family, &thetas, &v.prior_weights, &observations, v.epsilon, &GridOptions::default())
            .map_err(|e| CliError::Config(format!("grid oracle: {e}")))?;
    let priors = PriorSpec(vec![Prior::Discrete { values: v.grid.clone(), weights: v.prior_weights.clone() }]);
    let proposals = ProposalSpec(vec![Proposal::UniformGrid { values: v.grid.clone() }]);
    let chains = v
        .n_alive_values
        .par_iter()
        .map(|&n| -> Result<_, CliError> {
            let hmm = AbcHmm::new(family.clone(), v.epsilon, observations.clone(), 0.0)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let estimator =
                AliveEstimator::new(hmm, FilterOptions::new(n).with_cap(config.trial_cap).with_variant(config.variant));
            let chain = ChainConfig {
                priors: priors.clone(),
                proposals: proposals.clone(),
                iterations: config.chain.iterations,
                burn_in: config.chain.burn_in,
                thinning: config.chain.thinning,
                seed: derive_seed(config.seed, STREAM_CHAIN, n as u64),
                max_init_attempts: alive_smc::pmmh::DEFAULT_INIT_ATTEMPTS,
            };
            let record = run_chain(&chain, &estimator)?;
            let mut counts = vec![0usize; v.grid.len()];
            for row in &record.trace {
                let i = v.grid.iter().position(|&g| g == row.theta[0]).expect("chain stays on the grid");
                counts[i] += 1;
            }
            let total = record.trace.len() as f64;
            let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
            let total_variation = 0.5 * frequencies.iter().zip(&posterior).map(|(a, b)| (a - b).abs()).sum::<f64>();
            let summary = ValidationChain {
                n_alive: n,
                frequencies,
                total_variation,
                acceptance_rate: record.acceptance_rate(),
                cap_events: record.cap_events,
            };
            Ok((summary, record))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Validation { observations, posterior, chains })
}

fn pmmh_lg_validation(config: &ExperimentConfig) -> Result<Output, CliError> {
    let v = &config.lg_validation;
    let val = lg_validation(config)?;
    let mut header = vec!["sigma_v2".to_string(), "prior_weight".into(), "grid_posterior".into()];
    header.extend(val.chains.iter().map(|(c, _)| format!("chain_n{}", c.n_alive)));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut post = Table::new("posterior", &header_refs);
    for (i, g) in v.grid.iter().enumerate() {
        let mut row = vec![fmt_f64(*g), fmt_f64(v.prior_weights[i]), fmt_f64(val.posterior[i])];
        row.extend(val.chains.iter().map(|(c, _)| fmt_f64(c.frequencies[i])));
        post.push(row);
    }
    let mut tables = vec![post];
    let mut chains = BTreeMap::new();
    for (summary, record) in &val.chains {
        tables.push(trace_table(format!("trace_n{}", summary.n_alive), &["sigma_v2"], record));
        chains.insert(format!("n{}", summary.n_alive), serde_json::to_value(summary).expect("serializes"));
    }
    let summary = json!({ "observations": val.observations, "grid_posterior": val.posterior, "chains": chains });
    Ok(Output { tables, summary, ..Output::default() })
}
