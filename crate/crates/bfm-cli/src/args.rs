use std::path::PathBuf;

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

pub const OUT_DIR_ENV: &str = "BFM_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "bfm-out";
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Parser)]
#[command(name = "bfm", version, about = "Bi-failure-modes lifetime model toolkit")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum-likelihood fit of one model.
    FitMle(FitMleArgs),
    /// Hamiltonian Monte Carlo fit of the BFM.
    FitBayes(FitBayesArgs),
    /// Cause-specific risks from parameters or a fitted dataset.
    Risks(RisksArgs),
    /// Fit several models and rank them on seven metrics.
    Compare(CompareArgs),
    /// Posterior-predictive compatibility curves.
    Compat(CompatArgs),
    /// Scaled total-time-on-test curves per cause.
    Ttt(TttArgs),
    /// Simulate a BFM dataset.
    Sample(SampleArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FitMle(_) => "fit-mle",
            Command::FitBayes(_) => "fit-bayes",
            Command::Risks(_) => "risks",
            Command::Compare(_) => "compare",
            Command::Compat(_) => "compat",
            Command::Ttt(_) => "ttt",
            Command::Sample(_) => "sample",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output directory [default: $BFM_OUT_DIR, else ./bfm-out]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Key-value config file; its keys are the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Space {
    Log,
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Svg,
}

#[derive(Debug, Args)]
pub struct FitMleArgs {
    /// Dataset file, or `bundled:afst` / `bundled:efst`.
    #[arg(long)]
    pub data: String,
    #[arg(long, default_value = "bfm")]
    pub model: String,
    /// Random starting points on top of the model's anchors.
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, value_enum, default_value_t = Space::Log)]
    pub space: Space,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct HmcArgs {
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    /// Iterations per chain, warm-up included.
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,
    /// Initial leapfrog step size.
    #[arg(long, default_value_t = 0.02)]
    pub eps: f64,
    #[arg(long, default_value_t = 25)]
    pub leapfrog_steps: usize,
    /// Diagonal mass matrix, four comma-separated values.
    #[arg(long, default_value = "1,1,1,1")]
    pub mass: String,
    /// Keep the initial step size through warm-up.
    #[arg(long, action = ArgAction::SetTrue)]
    pub no_tune: bool,
    /// Gamma prior rate; one value or four.
    #[arg(long, default_value = "2")]
    pub prior_rate: String,
    /// Gamma prior means [default: the MLE].
    #[arg(long)]
    pub prior_mean: Option<String>,
    /// Chain starting point [default: the MLE].
    #[arg(long)]
    pub init: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitBayesArgs {
    #[arg(long)]
    pub data: String,
    #[command(flatten)]
    pub hmc: HmcArgs,
    /// Also write every kept draw to draws.csv.
    #[arg(long, action = ArgAction::SetTrue)]
    pub dump_draws: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RisksArgs {
    /// BFM parameters nu,theta,tau,zeta.
    #[arg(long)]
    pub params: Option<String>,
    /// Dataset to fit first when no parameters are given.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_draws: usize,
    /// Points of the log-spaced grid for the hazard-ratio curve.
    #[arg(long, default_value_t = 9)]
    pub p2_points: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub series_tol: f64,
    #[arg(long, default_value_t = 200)]
    pub series_max_terms: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: String,
    #[arg(long, default_value = "bfm,apd,facg,faepg,eaddw,gextew")]
    pub models: String,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    /// Parametric-bootstrap replicates for p-values (at least 199).
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CompatArgs {
    #[arg(long)]
    pub data: String,
    /// Number of simulated predictive sets.
    #[arg(long, default_value_t = 5)]
    pub sets: usize,
    #[command(flatten)]
    pub hmc: HmcArgs,
    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stratum {
    All,
    Cause1,
    Cause2,
    Combined,
}

#[derive(Debug, Args)]
pub struct TttArgs {
    #[arg(long)]
    pub data: String,
    #[arg(long, value_enum, default_value_t = Stratum::All)]
    pub stratum: Stratum,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub params: String,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Type-I censoring time.
    #[arg(long)]
    pub censor_at: Option<f64>,
    #[arg(long, default_value = "simulated")]
    pub name: String,
    #[command(flatten)]
    pub common: Common,
}

/// Flags that belong to the run's identity but not to its replay file.
const NOT_REPLAYED: [&str; 2] = ["config", "out-dir"];

/// Splices the entries of any `--config FILE` into `argv` right after the
/// subcommand, so flags given on the command line take precedence.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(sub_pos) = argv.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(argv);
    };
    let mut path = None;
    let mut i = sub_pos + 1;
    while i < argv.len() {
        if argv[i] == "--config" {
            path = argv.get(i + 1).cloned();
            i += 1;
        } else if let Some(p) = argv[i].strip_prefix("--config=") {
            path = Some(p.to_string());
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let cmd = Cli::command();
    let Some(sub) = cmd.find_subcommand(&argv[sub_pos]) else {
        return Ok(argv);
    };
    let entries = bfm::config::parse_config(std::path::Path::new(&path)).map_err(|e| match e {
        bfm::BfmError::Io { .. } => CliError::Usage(format!("config file: {e}")),
        other => CliError::Usage(format!("config file {path}: {other}")),
    })?;
    let mut spliced = Vec::new();
    for e in entries {
        if e.key == "config" {
            return Err(CliError::Usage(format!(
                "{path}:{}: config files cannot include other config files",
                e.line
            )));
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(e.key.as_str())) else {
            return Err(CliError::Usage(format!(
                "{path}:{}: unknown key `{}` for `{}`",
                e.line,
                e.key,
                sub.get_name()
            )));
        };
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match e.value.as_str() {
                "true" => spliced.push(format!("--{}", e.key)),
                "false" => {}
                v => {
                    return Err(CliError::Usage(format!(
                        "{path}:{}: `{}` takes true or false, got `{v}`",
                        e.line, e.key
                    )))
                }
            }
        } else {
            spliced.push(format!("--{}={}", e.key, e.value));
        }
    }
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(spliced);
    out.extend_from_slice(&argv[sub_pos + 1..]);
    Ok(out)
}

/// The fully resolved flag values of a run, keyed by long flag name, in
/// declaration order. Unset optional flags are omitted.
pub fn resolved_flags(matches: &clap::ArgMatches, sub_name: &str) -> Vec<(String, String)> {
    let cmd = Cli::command();
    let Some(sub) = cmd.find_subcommand(sub_name) else {
        return Vec::new();
    };
    let Some((_, m)) = matches.subcommand() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for arg in sub.get_arguments() {
        let (Some(long), id) = (arg.get_long(), arg.get_id().as_str()) else {
            continue;
        };
        if long == "help" || long == "version" {
            continue;
        }
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            out.push((long.to_string(), m.get_flag(id).to_string()));
        } else if let Some(mut raw) = m.get_raw(id) {
            if let Some(v) = raw.next_back() {
                out.push((long.to_string(), v.to_string_lossy().into_owned()));
            }
        }
    }
    out
}

/// Config-file text that replays a run.
pub fn replay_config(flags: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in flags.iter().filter(|(k, _)| !NOT_REPLAYED.contains(&k.as_str())) {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s
}
