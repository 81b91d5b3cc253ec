//! `popmarket` command line.
//!
//! Precedence for every setting: flag, then config file, then (for the seed
//! only) `POPMARKET_SEED`, then the built-in default. Exit status is 0 on
//! success, 1 on usage errors and 2 on runtime or I/O errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::engine::{run_market, run_random_baseline};
use crate::error::Error;
use crate::experiment::{
    self, execute_sweep, load_config_document, write_agents_csv, OutputOptions, ReplicationSummary,
    RunMetadata, RunStatus, SweepConfig,
};
use crate::model::MarketConfig;
use crate::stopping::{solve_threshold, GaussianSpec};
use crate::streams::derive_streams;

pub const SEED_ENV: &str = "POPMARKET_SEED";

#[derive(Debug, Parser)]
#[command(name = "popmarket", version, about = "Popularity-guided sequential search market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the random-search stopping threshold for a search cost.
    Threshold(ThresholdArgs),
    /// Run one market in which agents search by popularity.
    Run(MarketArgs),
    /// Run one market in which agents search in random order.
    Baseline(MarketArgs),
    /// Run the diversity x cost sweep.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Search cost, decimal or `1/2^k`.
    #[arg(long, value_parser = parse_cost)]
    cost: f64,
    /// Mean of total utility.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mean: f64,
    /// Variance of total utility.
    #[arg(long, default_value_t = 1.0, value_parser = parse_variance)]
    variance: f64,
}

#[derive(Debug, Args)]
struct MarketArgs {
    #[arg(long, value_parser = parse_diversity)]
    diversity: Option<f64>,
    /// Search cost, decimal or `1/2^k`.
    #[arg(long, value_parser = parse_cost)]
    cost: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    agents: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    alternatives: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the solved threshold.
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    objective_mean: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    subjective_mean: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Flat key-value run description (TOML, JSON, or a previous run.json).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated diversity values.
    #[arg(long, value_delimiter = ',', value_parser = parse_diversity)]
    diversity_grid: Option<Vec<f64>>,
    /// Comma-separated costs, decimal or `1/2^k`.
    #[arg(long, value_delimiter = ',', value_parser = parse_cost)]
    cost_grid: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_positive)]
    reps: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    agents: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    alternatives: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Also run the random-search control in every cell.
    #[arg(long)]
    baseline: bool,
    /// Write positions.csv.
    #[arg(long)]
    positions: bool,
    /// Write agents.csv (one row per agent per replication).
    #[arg(long)]
    per_agent: bool,
    /// Worker threads; results do not depend on this.
    #[arg(long, value_parser = parse_positive)]
    threads: Option<usize>,
    /// Flat key-value sweep description (TOML, JSON, or a previous run.json).
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Parameters of a single `run` or `baseline` market, as recorded in run.json.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleRunConfig {
    pub diversity: f64,
    pub cost: f64,
    pub n_agents: usize,
    pub n_alternatives: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub objective_mean: f64,
    #[serde(default)]
    pub subjective_mean: f64,
}

impl Default for SingleRunConfig {
    fn default() -> Self {
        Self {
            diversity: 0.2,
            cost: 0.125,
            n_agents: 1000,
            n_alternatives: 100,
            master_seed: 0,
            threshold: None,
            objective_mean: 0.0,
            subjective_mean: 0.0,
        }
    }
}

impl SingleRunConfig {
    pub fn market_config(&self) -> crate::Result<MarketConfig> {
        let config = MarketConfig::new(self.n_alternatives, self.n_agents, self.diversity, self.cost)?
            .with_means(self.objective_mean, self.subjective_mean)?;
        match self.threshold {
            Some(t) => config.with_threshold(t),
            None => Ok(config),
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(1),
            CliError::Runtime(_) => ExitCode::from(2),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Process entry point.
pub fn main() -> ExitCode {
    run(std::env::args_os())
}

/// Parses `args` (including the program name), executes, and reports errors
/// on standard error.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e {
                CliError::Usage(_) => "usage error",
                CliError::Runtime(_) => "error",
            };
            eprintln!("{kind}: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Threshold(args) => threshold(args),
        Command::Run(args) => single_market(args, false),
        Command::Baseline(args) => single_market(args, true),
        Command::Sweep(args) => sweep(args),
    }
}

fn threshold(args: ThresholdArgs) -> Result<(), CliError> {
    let spec = GaussianSpec::new(args.mean, args.variance).map_err(usage)?;
    let solution = solve_threshold(&spec, args.cost).map_err(CliError::Runtime)?;
    println!("T={} residual={:e}", solution.threshold, solution.residual);
    Ok(())
}

fn single_market(args: MarketArgs, random_search: bool) -> Result<(), CliError> {
    let (mut config, file_has_seed): (SingleRunConfig, bool) =
        with_config_file(args.config.as_deref())?;
    if !file_has_seed {
        if let Some(seed) = env_seed()? {
            config.master_seed = seed;
        }
    }
    if let Some(v) = args.diversity {
        config.diversity = v;
    }
    if let Some(v) = args.cost {
        config.cost = v;
    }
    if let Some(v) = args.agents {
        config.n_agents = v;
    }
    if let Some(v) = args.alternatives {
        config.n_alternatives = v;
    }
    if let Some(v) = args.seed {
        config.master_seed = v;
    }
    if args.threshold.is_some() {
        config.threshold = args.threshold;
    }
    if let Some(v) = args.objective_mean {
        config.objective_mean = v;
    }
    if let Some(v) = args.subjective_mean {
        config.subjective_mean = v;
    }
    let market = config.market_config().map_err(usage)?;

    let started = Instant::now();
    let streams = derive_streams(config.master_seed, 0, 0, 0);
    let (command, result) = if random_search {
        ("baseline", run_random_baseline(&market, &streams.baseline()))
    } else {
        ("run", run_market(&market, &streams))
    };

    create_dir(&args.out)?;
    write_agents_csv(std::slice::from_ref(&result), &args.out.join(experiment::AGENTS_FILE))
        .map_err(CliError::Runtime)?;
    let summary = ReplicationSummary::from_result(&result);
    eprintln!(
        "{command}: d={} c={} T={} mean_net={} mean_samples={}",
        market.diversity(),
        market.search_cost(),
        market.threshold(),
        summary.mean_net,
        summary.mean_samples
    );
    let outputs = OutputOptions {
        positions: false,
        per_agent: true,
    };
    RunMetadata::new(command, config.master_seed, config, outputs, RunStatus::Complete)
        .with_wall_time(started.elapsed().as_secs_f64())
        .write(&args.out.join(experiment::RUN_FILE))
        .map_err(CliError::Runtime)
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let (mut config, file_has_seed): (SweepConfig, bool) =
        with_config_file(args.config.as_deref())?;
    if !file_has_seed {
        if let Some(seed) = env_seed()? {
            config.master_seed = seed;
        }
    }
    if let Some(v) = args.diversity_grid {
        config.diversity_grid = v;
    }
    if let Some(v) = args.cost_grid {
        config.cost_grid = v;
    }
    if let Some(v) = args.reps {
        config.replications = v;
    }
    if let Some(v) = args.agents {
        config.n_agents = v;
    }
    if let Some(v) = args.alternatives {
        config.n_alternatives = v;
    }
    if let Some(v) = args.seed {
        config.master_seed = v;
    }
    if args.baseline {
        config.include_baseline = true;
    }
    config.validate().map_err(usage)?;
    for (d, c) in config.cells() {
        config.market_config(d, c).map_err(usage)?;
    }
    let options = OutputOptions {
        positions: args.positions,
        per_agent: args.per_agent,
    };

    let total = config.cells().len() * if config.include_baseline { 2 } else { 1 };
    let mut done = 0;
    let output = execute_sweep(&config, options, args.threads, &args.out, |cell| {
        done += 1;
        let first = &cell.results[0].config;
        eprintln!(
            "[{done}/{total}] d={} c={}{}",
            first.diversity(),
            first.search_cost(),
            if cell.baseline { " (random search)" } else { "" }
        );
    })
    .map_err(CliError::Runtime)?;
    eprintln!(
        "wrote {} aggregate rows to {}",
        output.records.len(),
        args.out.display()
    );
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(Error::io(dir, e)))
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned 64-bit integer, got `{raw}`"))),
        Err(_) => Ok(None),
    }
}

/// Defaults overlaid with the config file's keys. Also reports whether the
/// file set `master_seed`.
fn with_config_file<C>(path: Option<&Path>) -> Result<(C, bool), CliError>
where
    C: Default + Serialize + DeserializeOwned,
{
    let Some(path) = path else {
        return Ok((C::default(), false));
    };
    let overrides = load_config_document(path).map_err(|e| match e {
        Error::Io { .. } => CliError::Runtime(e),
        other => usage(other),
    })?;
    let has_seed = overrides.contains_key("master_seed");
    let mut merged = match serde_json::to_value(C::default()).expect("config serializes") {
        serde_json::Value::Object(map) => map,
        _ => unreachable!("config is a struct"),
    };
    merged.extend(overrides);
    let config = serde_json::from_value(serde_json::Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok((config, has_seed))
}

fn parse_f64(raw: &str) -> Result<f64, String> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("`{raw}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{raw}` is not finite"))
    }
}

fn parse_diversity(raw: &str) -> Result<f64, String> {
    let d = parse_f64(raw)?;
    if (0.0..=1.0).contains(&d) {
        Ok(d)
    } else {
        Err(format!("diversity must lie in [0, 1], got {d}"))
    }
}

/// Accepts a decimal, `a/b`, or `a/b^k`.
pub fn parse_cost(raw: &str) -> Result<f64, String> {
    let raw = raw.trim();
    let value = match raw.split_once('/') {
        None => parse_f64(raw)?,
        Some((num, den)) => {
            let num = parse_f64(num)?;
            let den = match den.split_once('^') {
                None => parse_f64(den)?,
                Some((base, exp)) => {
                    let exp: i32 = exp
                        .trim()
                        .parse()
                        .map_err(|_| format!("`{exp}` is not an integer exponent"))?;
                    parse_f64(base)?.powi(exp)
                }
            };
            num / den
        }
    };
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(format!("cost must be finite and positive, got `{raw}`"))
    }
}

fn parse_variance(raw: &str) -> Result<f64, String> {
    let v = parse_f64(raw)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("variance must be non-negative, got {v}"))
    }
}

fn parse_positive(raw: &str) -> Result<usize, String> {
    match raw.trim().parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("expected a positive integer, got `{raw}`")),
    }
}
