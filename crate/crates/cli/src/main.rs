use std::path::PathBuf;
use std::process::ExitCode;

use alive_smc::Variant;
use alive_smc_cli::experiments::{run_single_filter, FilterKind};
use alive_smc_cli::{run_experiment, CliError, ExperimentConfig, ExperimentId, Manifest};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "alive-smc", version, about = "Alive particle filter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One filter run on simulated linear-Gaussian data (first scenario).
    Filter(Overrides),
    /// A PMMH chain (`pmmh_sv` unless the config names `pmmh_lg_validation`).
    Pmmh(Overrides),
    /// A replicated experiment family.
    Experiment {
        /// Experiment id; falls back to the config's `experiment` field.
        id: Option<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// The negative-binomial identity table.
    Identities(Overrides),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Alive,
    Lgo,
    Standard,
}

#[derive(Args)]
struct Overrides {
    /// JSON config file, or a manifest written by an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long = "n-alive")]
    n_alive: Option<usize>,
    /// Replaces every tolerance in the config.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Trial cap per alive-filter step.
    #[arg(long)]
    cap: Option<usize>,
}

impl Overrides {
    fn resolve(&self, fallback: ExperimentId, forced: Option<ExperimentId>) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path, Some(fallback))?,
            None => ExperimentConfig::defaults(fallback),
        };
        if let Some(id) = forced {
            if id != cfg.experiment {
                let mut value = serde_json::to_value(&cfg).expect("config serializes");
                value["experiment"] = serde_json::to_value(id).expect("id serializes");
                cfg = ExperimentConfig::from_json(&value.to_string(), None)?;
            }
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(r) = self.replicates {
            cfg.replicates = r;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(n) = self.n_alive {
            cfg.n_alive = n;
        }
        if let Some(eps) = self.epsilon {
            for s in &mut cfg.lg.scenarios {
                s.epsilon = eps;
            }
            cfg.sv.epsilon = eps;
            cfg.lg_validation.epsilon = eps;
        }
        match self.variant {
            Some(VariantArg::Alive) => cfg.variant = Variant::Alive,
            Some(VariantArg::Lgo) => cfg.variant = Variant::Lgo,
            Some(VariantArg::Standard) | None => {}
        }
        if let Some(c) = self.cap {
            cfg.trial_cap = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<Manifest, CliError> {
    match cli.command {
        Command::Filter(o) => {
            let cfg = o.resolve(ExperimentId::LgFilteringPart2, None)?;
            let kind = match o.variant {
                Some(VariantArg::Standard) => FilterKind::Standard,
                _ => FilterKind::Alive(cfg.variant),
            };
            run_single_filter(&cfg, kind)
        }
        Command::Pmmh(o) => {
            let cfg = o.resolve(ExperimentId::PmmhSv, None)?;
            if !matches!(cfg.experiment, ExperimentId::PmmhSv | ExperimentId::PmmhLgValidation) {
                return Err(CliError::Config(format!("`pmmh` cannot run experiment `{}`", cfg.experiment.as_str())));
            }
            run_experiment(&cfg)
        }
        Command::Experiment { id, overrides } => {
            let forced = match id {
                Some(s) => Some(
                    ExperimentId::parse(&s).ok_or_else(|| CliError::Config(format!("unknown experiment id `{s}`")))?,
                ),
                None => None,
            };
            if forced.is_none() && overrides.config.is_none() {
                return Err(CliError::Config("name an experiment or pass --config".into()));
            }
            let cfg = overrides.resolve(forced.unwrap_or(ExperimentId::LgFilteringPart1), forced)?;
            run_experiment(&cfg)
        }
        Command::Identities(o) => {
            let cfg = o.resolve(ExperimentId::Identities, Some(ExperimentId::Identities))?;
            run_experiment(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(m) => {
            println!(
                "{}: wrote {} files to {} in {:.1}s (collapses: {}, cap events: {})",
                m.experiment,
                m.files.len(),
                m.config.out_dir.display(),
                m.wall_time_secs,
                m.collapse_events.len(),
                m.cap_events.len()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
