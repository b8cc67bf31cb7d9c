//! Resolved run configuration and the manifest that records it.
//!
//! Every knob of a run is carried here and serialized to
//! `<out>/manifest.json`, so a report can be re-derived exactly from
//! manifest + dataset + cache + loglikes. Defaults reproduce the main
//! configuration: m = 10 samples, ROUGE order n = 1, k = 20%, prefix ratio
//! 0.5, zlib level 6, lowercased matching.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use samia_core::attacks::{Method, ZlibWeighting, DEFAULT_K_PERCENT, DEFAULT_NUM_SAMPLES};
use samia_core::metrics::{CompressionLevel, DEFAULT_ZLIB_LEVEL};
use samia_core::textproc::Casing;
use serde::Serialize;

use crate::errors::Failure;
use crate::sampler::DEFAULT_TIMEOUT_SECS;

pub const DEFAULT_NGRAM_ORDER: usize = 1;
pub const DEFAULT_PREFIX_RATIO: f64 = 0.5;
pub const DEFAULT_FPR_BUDGET: f64 = 0.10;
pub const DEFAULT_DEV_FRACTION: f64 = 0.2;
pub const DEFAULT_MOCK_MEMBER_RATE: f64 = 0.2;
pub const DEFAULT_MOCK_NONMEMBER_RATE: f64 = 1.0;
/// Recorded in every manifest and report so runs under different
/// tokenizations are never compared silently.
pub const TOKENIZER_ID: &str = "unicode-whitespace";
/// Likelihood baselines consume log-likelihoods of the full text, not just
/// the reference half; recorded so reports state it.
pub const NLL_SCOPE: &str = "full_text";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    N,
    M,
    PrefixRatio,
}

impl SweepAxis {
    pub fn id(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::M => "m",
            SweepAxis::PrefixRatio => "prefix_ratio",
        }
    }
}

/// Every configurable knob of a run, fully resolved.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub dataset: PathBuf,
    pub methods: Vec<Method>,
    pub n: usize,
    pub samples: usize,
    pub k_percent: f64,
    pub prefix_ratio: f64,
    pub zlib_level: CompressionLevel,
    pub casing: Casing,
    pub zlib_weighting: ZlibWeighting,
    pub backend_url: Option<String>,
    pub model_id: Option<String>,
    pub mock_member_rate: f64,
    pub mock_nonmember_rate: f64,
    pub timeout_secs: u64,
    pub cache: Option<PathBuf>,
    pub loglikes: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub fpr_budget: f64,
    pub dev_fraction: f64,
    pub roc_csv: bool,
    pub hist_csv: bool,
    pub tokenizer: String,
    pub nll_scope: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_axis: Option<SweepAxis>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep_values: Vec<f64>,
}

impl RunConfig {
    /// Baseline configuration for `command`; callers override from flags
    /// and then call [`RunConfig::validate`].
    pub fn new(command: &str, dataset: PathBuf, out: PathBuf) -> Self {
        RunConfig {
            command: command.to_string(),
            dataset,
            methods: Method::all().to_vec(),
            n: DEFAULT_NGRAM_ORDER,
            samples: DEFAULT_NUM_SAMPLES,
            k_percent: DEFAULT_K_PERCENT,
            prefix_ratio: DEFAULT_PREFIX_RATIO,
            zlib_level: CompressionLevel::default(),
            casing: Casing::default(),
            zlib_weighting: ZlibWeighting::default(),
            backend_url: None,
            model_id: None,
            mock_member_rate: DEFAULT_MOCK_MEMBER_RATE,
            mock_nonmember_rate: DEFAULT_MOCK_NONMEMBER_RATE,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            cache: None,
            loglikes: None,
            scores: None,
            out,
            seed: 0,
            jobs: 1,
            fpr_budget: DEFAULT_FPR_BUDGET,
            dev_fraction: DEFAULT_DEV_FRACTION,
            roc_csv: false,
            hist_csv: false,
            tokenizer: TOKENIZER_ID.to_string(),
            nll_scope: NLL_SCOPE.to_string(),
            sweep_axis: None,
            sweep_values: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |msg: String| Err(Failure::config(msg));
        if self.methods.is_empty() {
            return bad("at least one method is required".to_string());
        }
        if self.n == 0 {
            return bad("--n must be at least 1".to_string());
        }
        if self.samples == 0 {
            return bad("--samples must be at least 1".to_string());
        }
        if !(self.k_percent > 0.0 && self.k_percent <= 100.0) {
            return bad(format!(
                "--k-percent must lie in (0, 100], got {}",
                self.k_percent
            ));
        }
        if !(self.prefix_ratio > 0.0 && self.prefix_ratio < 1.0) {
            return bad(format!(
                "--prefix-ratio must lie in (0, 1), got {}",
                self.prefix_ratio
            ));
        }
        if !(self.fpr_budget > 0.0 && self.fpr_budget <= 1.0) {
            return bad(format!(
                "--fpr-budget must lie in (0, 1], got {}",
                self.fpr_budget
            ));
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return bad(format!(
                "--dev-fraction must lie in (0, 1), got {}",
                self.dev_fraction
            ));
        }
        for (flag, rate) in [
            ("--mock-member-rate", self.mock_member_rate),
            ("--mock-nonmember-rate", self.mock_nonmember_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("{flag} must lie in [0, 1], got {rate}"));
            }
        }
        if self.jobs == 0 {
            return bad("--jobs must be at least 1".to_string());
        }
        Ok(())
    }

    /// The path scores are written to by `score` and read from by
    /// `evaluate` unless overridden.
    pub fn scores_path(&self) -> PathBuf {
        self.scores
            .clone()
            .unwrap_or_else(|| self.out.join("scores.csv"))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out.join("manifest.json")
    }

    /// Metadata block stamped into reports: everything that shapes a score
    /// or a threshold, as strings.
    pub fn report_metadata(&self) -> BTreeMap<String, String> {
        let mut meta = BTreeMap::new();
        meta.insert("tokenizer".to_string(), self.tokenizer.clone());
        meta.insert("casing".to_string(), self.casing.to_string());
        meta.insert("zlib_level".to_string(), self.zlib_level.to_string());
        meta.insert(
            "zlib_weighting".to_string(),
            self.zlib_weighting.to_string(),
        );
        meta.insert("m".to_string(), self.samples.to_string());
        meta.insert("n".to_string(), self.n.to_string());
        meta.insert("k_percent".to_string(), self.k_percent.to_string());
        meta.insert("prefix_ratio".to_string(), self.prefix_ratio.to_string());
        meta.insert("seed".to_string(), self.seed.to_string());
        meta.insert("dev_fraction".to_string(), self.dev_fraction.to_string());
        meta.insert("nll_scope".to_string(), self.nll_scope.clone());
        meta.insert("dataset".to_string(), self.dataset.display().to_string());
        meta
    }
}

/// Parses the `--methods` list: comma-separated method ids, deduplicated
/// preserving first occurrence; the literal `all` expands to every method.
pub fn parse_methods(arg: &str) -> Result<Vec<Method>, Failure> {
    let mut methods = Vec::new();
    for part in arg.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "all" {
            for method in Method::all() {
                if !methods.contains(&method) {
                    methods.push(method);
                }
            }
            continue;
        }
        let method: Method = part
            .parse()
            .map_err(|e| Failure::config(format!("--methods: {e}")))?;
        if !methods.contains(&method) {
            methods.push(method);
        }
    }
    if methods.is_empty() {
        return Err(Failure::config("--methods lists no methods"));
    }
    Ok(methods)
}

/// Parses `--zlib-level` into a validated compression level.
pub fn parse_zlib_level(level: u8) -> Result<CompressionLevel, Failure> {
    CompressionLevel::new(level).map_err(|e| Failure::config(format!("--zlib-level: {e}")))
}

pub fn parse_sweep_values(axis: SweepAxis, arg: &str) -> Result<Vec<f64>, Failure> {
    let mut values = Vec::new();
    for part in arg.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let value: f64 = part
            .parse()
            .map_err(|_| Failure::config(format!("--values: {part} is not a number")))?;
        let valid = match axis {
            SweepAxis::N | SweepAxis::M => value >= 1.0 && value.fract() == 0.0,
            SweepAxis::PrefixRatio => value > 0.0 && value < 1.0,
        };
        if !valid {
            return Err(Failure::config(format!(
                "--values: {part} is not a valid {} value",
                axis.id()
            )));
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(Failure::config("--values lists no sweep values"));
    }
    Ok(values)
}

/// Writes `<out>/manifest.json` (atomically) with every knob of the run.
pub fn write_manifest(config: &RunConfig) -> Result<PathBuf, Failure> {
    let path = config.manifest_path();
    let json = serde_json::to_string_pretty(config).expect("config serialization is infallible");
    crate::output::write_atomic(&path, format!("{json}\n").as_bytes())?;
    Ok(path)
}

/// Default zlib level exposed for flag definitions.
pub fn default_zlib_level() -> u8 {
    DEFAULT_ZLIB_LEVEL
}

pub fn display_path(path: &Path) -> String {
    path.display().to_string()
}
