//! Flag parsing and dispatch.
//!
//! Exit codes: 0 success, 1 configuration or data error, 2 backend error.
//! Failures are printed to stderr as a JSON error list; `--help` and
//! `--version` print to stdout and exit 0.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};
use samia_core::textproc::Casing;

use crate::commands;
use crate::config::{
    default_zlib_level, parse_methods, parse_sweep_values, parse_zlib_level, RunConfig, SweepAxis,
    DEFAULT_DEV_FRACTION, DEFAULT_FPR_BUDGET, DEFAULT_MOCK_MEMBER_RATE,
    DEFAULT_MOCK_NONMEMBER_RATE, DEFAULT_NGRAM_ORDER, DEFAULT_PREFIX_RATIO,
};
use crate::errors::Failure;
use crate::sampler::DEFAULT_TIMEOUT_SECS;
use samia_core::attacks::{DEFAULT_K_PERCENT, DEFAULT_NUM_SAMPLES};

#[derive(Debug, Parser)]
#[command(
    name = "samia",
    version,
    about = "Sampling-based membership inference: generate, score, evaluate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample candidate continuations for every instance into the cache
    Generate(GenerateArgs),
    /// Score instances with the configured methods into scores.csv
    Score(ScoreArgs),
    /// Build the ROC/AUC report from a scores file
    Evaluate(EvaluateArgs),
    /// Score and evaluate once per value of a swept parameter
    Sweep(SweepArgs),
    /// Print per-length-group dataset statistics
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Dataset JSONL: {"id"?, "text"|"input", "label": 0|1, "length"?}
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory for manifests, scores, and reports
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for mock generation and calibration dev splits
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum parallel workers
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    /// Comma-separated methods (samia, samia_zlib, loss, lowercase,
    /// ppl_zlib, mink) or `all`
    #[arg(long, default_value = "all")]
    pub methods: String,
    /// n-gram order for overlap scoring
    #[arg(long, default_value_t = DEFAULT_NGRAM_ORDER)]
    pub n: usize,
    /// Candidates per instance (m)
    #[arg(long, default_value_t = DEFAULT_NUM_SAMPLES)]
    pub samples: usize,
    /// Percentage of lowest log-likelihoods kept by mink
    #[arg(long, default_value_t = DEFAULT_K_PERCENT)]
    pub k_percent: f64,
    /// Fraction of each text used as the generation prompt
    #[arg(long, default_value_t = DEFAULT_PREFIX_RATIO)]
    pub prefix_ratio: f64,
    /// zlib compression level, 0-9
    #[arg(long, default_value_t = default_zlib_level())]
    pub zlib_level: u8,
    /// Token casing before matching: preserve or lowercase
    #[arg(long, default_value = "lowercase")]
    pub casing: String,
    /// How samia_zlib combines recall and compressed size:
    /// per_candidate or mean_product
    #[arg(long, default_value = "per_candidate")]
    pub zlib_weighting: String,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// Generation backend: an http(s) completions endpoint, `mock`, or
    /// `cache` (verify the cache is already complete)
    #[arg(long)]
    pub backend_url: String,
    /// Model identifier forwarded to http backends
    #[arg(long)]
    pub model_id: Option<String>,
    /// Mock corruption rate for member instances
    #[arg(long, default_value_t = DEFAULT_MOCK_MEMBER_RATE)]
    pub mock_member_rate: f64,
    /// Mock corruption rate for nonmember instances
    #[arg(long, default_value_t = DEFAULT_MOCK_NONMEMBER_RATE)]
    pub mock_nonmember_rate: f64,
    /// HTTP request timeout in seconds
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_SECS)]
    pub timeout_secs: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// FPR budget for TPR@FPR and threshold calibration
    #[arg(long, default_value_t = DEFAULT_FPR_BUDGET)]
    pub fpr_budget: f64,
    /// Fraction of each class held out as calibration dev data
    #[arg(long, default_value_t = DEFAULT_DEV_FRACTION)]
    pub dev_fraction: f64,
    /// Also write ROC points to roc.csv
    #[arg(long)]
    pub roc_csv: bool,
    /// Also write per-class score histograms to hist.csv
    #[arg(long)]
    pub hist_csv: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Candidate cache JSONL, created if missing (append-only)
    #[arg(long)]
    pub cache: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Candidates per instance (m)
    #[arg(long, default_value_t = DEFAULT_NUM_SAMPLES)]
    pub samples: usize,
    /// Fraction of each text used as the generation prompt
    #[arg(long, default_value_t = DEFAULT_PREFIX_RATIO)]
    pub prefix_ratio: f64,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Candidate cache JSONL (required for sampling methods)
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Token log-likelihoods JSONL (required for likelihood baselines)
    #[arg(long)]
    pub loglikes: Option<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scores CSV to evaluate (defaults to <out>/scores.csv)
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Candidate cache JSONL holding at least max(m) completions
    #[arg(long)]
    pub cache: PathBuf,
    /// Token log-likelihoods JSONL (required for likelihood baselines)
    #[arg(long)]
    pub loglikes: Option<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Swept parameter
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated axis values, e.g. 1,2,5,10 or 0.25,0.5,0.75
    #[arg(long)]
    pub values: String,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset JSONL to summarize
    #[arg(long)]
    pub dataset: PathBuf,
    /// Optional directory for stats.json
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Compare counts against the published WikiMIA statistics
    #[arg(long)]
    pub check_published: bool,
}

fn parse_casing(name: &str) -> Result<Casing, Failure> {
    name.parse()
        .map_err(|e| Failure::config(format!("--casing: {e}")))
}

fn apply_scoring(config: &mut RunConfig, args: &ScoringArgs) -> Result<(), Failure> {
    config.methods = parse_methods(&args.methods)?;
    config.n = args.n;
    config.samples = args.samples;
    config.k_percent = args.k_percent;
    config.prefix_ratio = args.prefix_ratio;
    config.zlib_level = parse_zlib_level(args.zlib_level)?;
    config.casing = parse_casing(&args.casing)?;
    config.zlib_weighting = args
        .zlib_weighting
        .parse()
        .map_err(|e| Failure::config(format!("--zlib-weighting: {e}")))?;
    Ok(())
}

fn apply_backend(config: &mut RunConfig, args: &BackendArgs) {
    config.backend_url = Some(args.backend_url.clone());
    config.model_id = args.model_id.clone();
    config.mock_member_rate = args.mock_member_rate;
    config.mock_nonmember_rate = args.mock_nonmember_rate;
    config.timeout_secs = args.timeout_secs;
}

fn apply_eval(config: &mut RunConfig, args: &EvalArgs) {
    config.fpr_budget = args.fpr_budget;
    config.dev_fraction = args.dev_fraction;
    config.roc_csv = args.roc_csv;
    config.hist_csv = args.hist_csv;
}

fn apply_common(config: &mut RunConfig, args: &CommonArgs) {
    config.seed = args.seed;
    config.jobs = args.jobs;
}

/// Resolves parsed flags into a validated [`RunConfig`] and runs the
/// command.
pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate(args) => {
            let mut config = RunConfig::new(
                "generate",
                args.common.dataset.clone(),
                args.common.out.clone(),
            );
            apply_common(&mut config, &args.common);
            apply_backend(&mut config, &args.backend);
            config.cache = Some(args.cache);
            config.samples = args.samples;
            config.prefix_ratio = args.prefix_ratio;
            commands::cmd_generate(&config)
        }
        Command::Score(args) => {
            let mut config = RunConfig::new(
                "score",
                args.common.dataset.clone(),
                args.common.out.clone(),
            );
            apply_common(&mut config, &args.common);
            apply_scoring(&mut config, &args.scoring)?;
            config.cache = args.cache;
            config.loglikes = args.loglikes;
            commands::cmd_score(&config)
        }
        Command::Evaluate(args) => {
            let mut config = RunConfig::new(
                "evaluate",
                args.common.dataset.clone(),
                args.common.out.clone(),
            );
            apply_common(&mut config, &args.common);
            apply_scoring(&mut config, &args.scoring)?;
            apply_eval(&mut config, &args.eval);
            config.scores = args.scores;
            commands::cmd_evaluate(&config)
        }
        Command::Sweep(args) => {
            let mut config = RunConfig::new(
                "sweep",
                args.common.dataset.clone(),
                args.common.out.clone(),
            );
            apply_common(&mut config, &args.common);
            apply_scoring(&mut config, &args.scoring)?;
            apply_eval(&mut config, &args.eval);
            config.cache = Some(args.cache);
            config.loglikes = args.loglikes;
            config.sweep_axis = Some(args.axis);
            config.sweep_values = parse_sweep_values(args.axis, &args.values)?;
            commands::cmd_sweep(&config)
        }
        Command::Stats(args) => {
            commands::cmd_stats(&args.dataset, args.out.as_deref(), args.check_published)
        }
    }
}

fn emit_failure(failure: &Failure) {
    eprintln!(
        "{}",
        serde_json::to_string_pretty(failure).expect("failure serialization is infallible")
    );
}

/// Full process behavior: parse, run, print errors, map the exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let failure = Failure::config(err.to_string());
            emit_failure(&failure);
            return ExitCode::from(failure.exit_code());
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            emit_failure(&failure);
            ExitCode::from(failure.exit_code())
        }
    }
}
