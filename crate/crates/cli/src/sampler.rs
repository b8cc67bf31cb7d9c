//! Candidate generation: a completions-style HTTP client, an append-only
//! JSONL replay cache, and a seeded mock generator for tests and synthetic
//! experiments.
//!
//! Generation is cache-first. A record is keyed by `(target_id, prompt)`;
//! keying on the prompt means a changed prefix ratio or dataset text is
//! detected as a mismatch instead of silently reusing stale samples. The
//! cache file is append-only and the newest record for a key wins.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use samia_core::attacks::GenParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TIMEOUT_SECS: u64 = 30;
pub const TOKEN_ENV_VAR: &str = "SAMIA_BACKEND_TOKEN";

const MAX_HTTP_ATTEMPTS: u32 = 4;
const BACKOFF_BASE_MS: u64 = 150;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    CacheParse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("no cached candidates for target {target_id}")]
    CacheMiss { target_id: String },
    #[error(
        "cached candidates for target {target_id} were generated from a different prompt \
         (prefix ratio or dataset text changed since generation)"
    )]
    PromptMismatch { target_id: String },
    #[error("target {target_id}: {available} cached candidate(s), {requested} requested")]
    InsufficientSamples {
        target_id: String,
        available: usize,
        requested: usize,
    },
    #[error("target {target_id}: backend request failed after {attempts} attempt(s): {message}")]
    RequestFailed {
        target_id: String,
        attempts: u32,
        message: String,
    },
    #[error("target {target_id}: malformed backend response: {message}")]
    BadResponse { target_id: String, message: String },
    #[error("no mock specification for target {target_id}")]
    MissingMockSpec { target_id: String },
    #[error("invalid backend url {url}: {message}")]
    InvalidUrl { url: String, message: String },
}

impl SamplerError {
    pub fn target_id(&self) -> Option<&str> {
        match self {
            SamplerError::CacheMiss { target_id }
            | SamplerError::PromptMismatch { target_id }
            | SamplerError::InsufficientSamples { target_id, .. }
            | SamplerError::RequestFailed { target_id, .. }
            | SamplerError::BadResponse { target_id, .. }
            | SamplerError::MissingMockSpec { target_id } => Some(target_id),
            _ => None,
        }
    }
}

/// One sampling request: the prefix to continue and how to sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub num_samples: usize,
    #[serde(flatten)]
    pub params: GenParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendTag {
    Http,
    Cache,
    Mock,
}

/// A fulfilled request: exactly `num_samples` completions plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub target_id: String,
    pub request: GenerationRequest,
    pub completions: Vec<String>,
    pub timestamp: DateTime<Utc>,
    pub backend: BackendTag,
}

// ---------------------------------------------------------------------------
// cache

/// In-memory view of the JSONL cache. Lookups are by `(target_id, prompt)`
/// and return the newest matching record.
#[derive(Debug, Default)]
pub struct CandidateCache {
    records: Vec<GenerationRecord>,
    index: HashMap<(String, String), usize>,
    ids: HashSet<String>,
}

impl CandidateCache {
    /// Loads a cache file; a missing file is an empty cache, a malformed
    /// line is an error naming it.
    pub fn load(path: &Path) -> Result<Self, SamplerError> {
        let file = match File::open(path) {
            Ok(file) => file,
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => {
                return Ok(CandidateCache::default())
            }
            Err(source) => {
                return Err(SamplerError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        let mut cache = CandidateCache::default();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| SamplerError::Io {
                path: path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: GenerationRecord =
                serde_json::from_str(&line).map_err(|e| SamplerError::CacheParse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            cache.insert(record);
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn insert(&mut self, record: GenerationRecord) {
        let key = (record.target_id.clone(), record.request.prompt.clone());
        self.ids.insert(record.target_id.clone());
        self.index.insert(key, self.records.len());
        self.records.push(record);
    }

    pub fn lookup(&self, target_id: &str, prompt: &str) -> Option<&GenerationRecord> {
        self.index
            .get(&(target_id.to_string(), prompt.to_string()))
            .map(|&idx| &self.records[idx])
    }

    /// Whether any record exists for the id, regardless of prompt; lets
    /// callers distinguish a plain miss from a prompt mismatch.
    pub fn contains_id(&self, target_id: &str) -> bool {
        self.ids.contains(target_id)
    }

    /// Newest record matching the prompt, with mismatches and shortfalls
    /// reported as errors. `requested` caps how many completions must be
    /// present; the caller takes the first `requested` of them.
    pub fn fetch(
        &self,
        target_id: &str,
        prompt: &str,
        requested: usize,
    ) -> Result<&GenerationRecord, SamplerError> {
        let record = self.lookup(target_id, prompt).ok_or_else(|| {
            if self.contains_id(target_id) {
                SamplerError::PromptMismatch {
                    target_id: target_id.to_string(),
                }
            } else {
                SamplerError::CacheMiss {
                    target_id: target_id.to_string(),
                }
            }
        })?;
        if record.completions.len() < requested {
            return Err(SamplerError::InsufficientSamples {
                target_id: target_id.to_string(),
                available: record.completions.len(),
                requested,
            });
        }
        Ok(record)
    }
}

/// Single-writer append handle for the cache file.
#[derive(Debug)]
pub struct CacheAppender {
    path: PathBuf,
    file: File,
}

impl CacheAppender {
    pub fn open(path: &Path) -> Result<Self, SamplerError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| SamplerError::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| SamplerError::Io {
                path: path.display().to_string(),
                source,
            })?;
        Ok(CacheAppender {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn append(&mut self, record: &GenerationRecord) -> Result<(), SamplerError> {
        let io_err = |source| SamplerError::Io {
            path: self.path.display().to_string(),
            source,
        };
        let line = serde_json::to_string(record).expect("record serialization is infallible");
        writeln!(self.file, "{line}").map_err(io_err)?;
        self.file.flush().map_err(io_err)
    }
}

// ---------------------------------------------------------------------------
// mock generation

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Per-sample seed: mixes the run seed with the target id and the sample
/// index so every candidate stream is independent yet reproducible.
pub fn sample_seed(base_seed: u64, target_id: &str, sample_index: usize) -> u64 {
    let mut hash = fnv1a(base_seed, target_id.as_bytes());
    hash = fnv1a(hash, &(sample_index as u64).to_le_bytes());
    hash
}

/// Emits the reference with each word independently replaced by a random
/// out-of-vocabulary word with probability `corruption_rate`. Deterministic
/// in `(prefix, reference, corruption_rate, seed)`; the prefix is folded
/// into the stream seed so different prompts sample differently.
///
/// Replacement words are drawn from a lowercase-letter alphabet and redrawn
/// while they collide (case-insensitively) with any reference word, so a
/// fully corrupted output shares no words with the reference and expected
/// unigram recall is exactly `1 - corruption_rate`.
pub fn mock_generate(prefix: &str, reference: &str, corruption_rate: f64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(seed, prefix.as_bytes()));
    let words: Vec<&str> = reference.split_whitespace().collect();
    let corrupt: Vec<bool> = words
        .iter()
        .map(|_| rng.gen::<f64>() < corruption_rate)
        .collect();
    if !corrupt.iter().any(|&c| c) {
        return reference.to_string();
    }
    let vocab: HashSet<String> = words.iter().map(|w| w.to_lowercase()).collect();
    let replaced: Vec<String> = words
        .iter()
        .zip(&corrupt)
        .map(|(&word, &corrupt)| {
            if !corrupt {
                return word.to_string();
            }
            loop {
                let drawn: String = (0..10)
                    .map(|_| char::from(b'a' + rng.gen_range(0..26u8)))
                    .collect();
                if !vocab.contains(&drawn) {
                    return drawn;
                }
            }
        })
        .collect();
    replaced.join(" ")
}

// ---------------------------------------------------------------------------
// backends

/// What a mock backend generates for one target: a corrupted copy of the
/// reference half at the configured corruption rate.
#[derive(Debug, Clone)]
pub struct MockSpec {
    pub reference: String,
    pub corruption_rate: f64,
}

#[derive(Debug, Default)]
pub struct MockBackend {
    pub seed: u64,
    pub specs: HashMap<String, MockSpec>,
}

#[derive(Debug)]
pub struct HttpBackend {
    url: String,
    client: reqwest::blocking::Client,
    token: Option<String>,
    max_attempts: u32,
}

impl HttpBackend {
    pub fn new(url: &str, timeout: Duration) -> Result<Self, SamplerError> {
        if !url.starts_with("http://") && !url.starts_with("https://") {
            return Err(SamplerError::InvalidUrl {
                url: url.to_string(),
                message: "expected an http:// or https:// url".to_string(),
            });
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| SamplerError::InvalidUrl {
                url: url.to_string(),
                message: e.to_string(),
            })?;
        Ok(HttpBackend {
            url: url.to_string(),
            client,
            token: std::env::var(TOKEN_ENV_VAR).ok(),
            max_attempts: MAX_HTTP_ATTEMPTS,
        })
    }

    fn request_body(req: &GenerationRequest) -> serde_json::Value {
        let mut body = serde_json::json!({
            "prompt": req.prompt,
            "n": req.num_samples,
            "temperature": req.params.temperature,
            "max_tokens": req.params.max_length,
            "top_k": req.params.top_k,
            "top_p": req.params.top_p,
        });
        if let Some(model) = &req.params.model_id {
            body["model"] = serde_json::Value::String(model.clone());
        }
        body
    }

    /// Accepts either `{"completions": ["..."]}` or the completions-API
    /// shape `{"choices": [{"text": "..."}]}`.
    fn parse_completions(value: &serde_json::Value) -> Result<Vec<String>, String> {
        if let Some(list) = value.get("completions").and_then(|v| v.as_array()) {
            return list
                .iter()
                .map(|item| {
                    item.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| "completions entries must be strings".to_string())
                })
                .collect();
        }
        if let Some(list) = value.get("choices").and_then(|v| v.as_array()) {
            return list
                .iter()
                .map(|item| {
                    item.get("text")
                        .and_then(|t| t.as_str())
                        .map(str::to_string)
                        .ok_or_else(|| "choices entries must carry a text field".to_string())
                })
                .collect();
        }
        Err("response carries neither completions nor choices".to_string())
    }

    fn generate(
        &self,
        target_id: &str,
        req: &GenerationRequest,
    ) -> Result<Vec<String>, SamplerError> {
        let body = Self::request_body(req);
        let mut last_error = String::new();
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(BACKOFF_BASE_MS << (attempt - 1)));
            }
            let mut request = self.client.post(&self.url).json(&body);
            if let Some(token) = &self.token {
                request = request.bearer_auth(token);
            }
            let response = match request.send() {
                Ok(response) => response,
                Err(err) => {
                    last_error = err.to_string();
                    continue;
                }
            };
            let status = response.status();
            if status.is_server_error() || status.as_u16() == 429 {
                last_error = format!("http status {status}");
                continue;
            }
            if !status.is_success() {
                return Err(SamplerError::RequestFailed {
                    target_id: target_id.to_string(),
                    attempts: attempt + 1,
                    message: format!("http status {status}"),
                });
            }
            let value: serde_json::Value =
                response.json().map_err(|e| SamplerError::BadResponse {
                    target_id: target_id.to_string(),
                    message: e.to_string(),
                })?;
            let completions =
                Self::parse_completions(&value).map_err(|message| SamplerError::BadResponse {
                    target_id: target_id.to_string(),
                    message,
                })?;
            if completions.len() != req.num_samples {
                // partial batches are never accepted
                return Err(SamplerError::BadResponse {
                    target_id: target_id.to_string(),
                    message: format!(
                        "expected {} completions, got {}",
                        req.num_samples,
                        completions.len()
                    ),
                });
            }
            return Ok(completions);
        }
        Err(SamplerError::RequestFailed {
            target_id: target_id.to_string(),
            attempts: self.max_attempts,
            message: last_error,
        })
    }
}

/// Where completions come from. `CacheOnly` never generates; it validates
/// that every needed record is already present.
#[derive(Debug)]
pub enum Backend {
    Http(HttpBackend),
    Mock(MockBackend),
    CacheOnly,
}

impl Backend {
    pub fn tag(&self) -> BackendTag {
        match self {
            Backend::Http(_) => BackendTag::Http,
            Backend::Mock(_) => BackendTag::Mock,
            Backend::CacheOnly => BackendTag::Cache,
        }
    }

    /// Produces exactly `req.num_samples` completions or fails; transient
    /// HTTP failures are retried with bounded exponential backoff.
    pub fn generate(
        &self,
        target_id: &str,
        req: &GenerationRequest,
    ) -> Result<Vec<String>, SamplerError> {
        match self {
            Backend::Http(http) => http.generate(target_id, req),
            Backend::Mock(mock) => {
                let spec =
                    mock.specs
                        .get(target_id)
                        .ok_or_else(|| SamplerError::MissingMockSpec {
                            target_id: target_id.to_string(),
                        })?;
                Ok((0..req.num_samples)
                    .map(|j| {
                        mock_generate(
                            &req.prompt,
                            &spec.reference,
                            spec.corruption_rate,
                            sample_seed(mock.seed, target_id, j),
                        )
                    })
                    .collect())
            }
            Backend::CacheOnly => Err(SamplerError::CacheMiss {
                target_id: target_id.to_string(),
            }),
        }
    }
}

/// Cache-first fulfillment of one request: a cached record with enough
/// completions is returned as-is; otherwise the backend generates a fresh
/// record which is appended to the cache before being returned.
pub fn generate_candidates(
    target_id: &str,
    req: &GenerationRequest,
    backend: &Backend,
    cache: &mut CandidateCache,
    appender: &mut CacheAppender,
) -> Result<GenerationRecord, SamplerError> {
    if let Some(record) = cache.lookup(target_id, &req.prompt) {
        if record.completions.len() >= req.num_samples {
            return Ok(record.clone());
        }
    }
    if matches!(backend, Backend::CacheOnly) {
        // distinguish a wrong-prompt record from a plain miss
        return cache
            .fetch(target_id, &req.prompt, req.num_samples)
            .cloned();
    }
    let completions = backend.generate(target_id, req)?;
    let record = GenerationRecord {
        target_id: target_id.to_string(),
        request: req.clone(),
        completions,
        timestamp: Utc::now(),
        backend: backend.tag(),
    };
    appender.append(&record)?;
    cache.insert(record.clone());
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(prompt: &str, m: usize) -> GenerationRequest {
        GenerationRequest {
            prompt: prompt.to_string(),
            num_samples: m,
            params: GenParams::default(),
        }
    }

    #[test]
    fn mock_is_deterministic_and_respects_rate_extremes() {
        let reference = "The quick brown Fox jumps over the lazy dog";
        let a = mock_generate("p", reference, 0.4, 7);
        let b = mock_generate("p", reference, 0.4, 7);
        assert_eq!(a, b);
        assert_ne!(a, mock_generate("p", reference, 0.4, 8));
        assert_ne!(a, mock_generate("q", reference, 0.4, 7));

        assert_eq!(mock_generate("p", reference, 0.0, 3), reference);
        let ruined = mock_generate("p", reference, 1.0, 3);
        let vocab: HashSet<String> = reference
            .split_whitespace()
            .map(|w| w.to_lowercase())
            .collect();
        assert!(ruined
            .split_whitespace()
            .all(|w| !vocab.contains(&w.to_lowercase())));
        assert_eq!(ruined.split_whitespace().count(), 9);
    }

    #[test]
    fn mock_corruption_rate_matches_expectation() {
        let reference: String = (0..50).map(|i| format!("w{i} ")).collect();
        let trials = 400;
        let mut kept = 0usize;
        for seed in 0..trials {
            let out = mock_generate("p", reference.trim(), 0.3, seed);
            kept += out
                .split_whitespace()
                .filter(|w| w.starts_with('w'))
                .count();
        }
        let kept_rate = kept as f64 / (trials as f64 * 50.0);
        assert!((kept_rate - 0.7).abs() < 0.02, "kept rate {kept_rate}");
    }

    #[test]
    fn cache_round_trips_and_newest_record_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut appender = CacheAppender::open(&path).unwrap();
        let mut record = GenerationRecord {
            target_id: "7".to_string(),
            request: request("once upon", 2),
            completions: vec!["a time".to_string(), "a mock".to_string()],
            timestamp: Utc::now(),
            backend: BackendTag::Mock,
        };
        appender.append(&record).unwrap();
        record.completions = vec!["newer".to_string(), "pair".to_string()];
        appender.append(&record).unwrap();

        let cache = CandidateCache::load(&path).unwrap();
        assert_eq!(cache.len(), 2);
        let found = cache.lookup("7", "once upon").unwrap();
        assert_eq!(found.completions[0], "newer");
        assert!(cache.lookup("7", "other prompt").is_none());
        assert!(cache.contains_id("7"));
        assert!(!cache.contains_id("8"));
    }

    #[test]
    fn fetch_distinguishes_miss_mismatch_and_shortfall() {
        let mut cache = CandidateCache::default();
        cache.insert(GenerationRecord {
            target_id: "1".to_string(),
            request: request("prefix words", 2),
            completions: vec!["x".to_string(), "y".to_string()],
            timestamp: Utc::now(),
            backend: BackendTag::Http,
        });
        assert!(matches!(
            cache.fetch("2", "prefix words", 1),
            Err(SamplerError::CacheMiss { .. })
        ));
        assert!(matches!(
            cache.fetch("1", "other prefix", 1),
            Err(SamplerError::PromptMismatch { .. })
        ));
        assert!(matches!(
            cache.fetch("1", "prefix words", 3),
            Err(SamplerError::InsufficientSamples { available: 2, .. })
        ));
        assert_eq!(
            cache
                .fetch("1", "prefix words", 2)
                .unwrap()
                .completions
                .len(),
            2
        );
    }

    #[test]
    fn generate_candidates_is_idempotent_on_a_warm_cache() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut cache = CandidateCache::load(&path).unwrap();
        let mut appender = CacheAppender::open(&path).unwrap();
        let backend = Backend::Mock(MockBackend {
            seed: 11,
            specs: HashMap::from([(
                "0".to_string(),
                MockSpec {
                    reference: "one two three four".to_string(),
                    corruption_rate: 0.5,
                },
            )]),
        });
        let req = request("the prompt", 3);
        let first = generate_candidates("0", &req, &backend, &mut cache, &mut appender).unwrap();
        assert_eq!(first.completions.len(), 3);
        let again = generate_candidates("0", &req, &backend, &mut cache, &mut appender).unwrap();
        assert_eq!(first, again);
        // only the first call appended
        assert_eq!(CandidateCache::load(&path).unwrap().len(), 1);
        // replay through the cache-only backend returns the same record
        let replayed =
            generate_candidates("0", &req, &Backend::CacheOnly, &mut cache, &mut appender).unwrap();
        assert_eq!(replayed, first);
    }

    #[test]
    fn cache_only_backend_misses_loudly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut cache = CandidateCache::load(&path).unwrap();
        let mut appender = CacheAppender::open(&path).unwrap();
        let err = generate_candidates(
            "9",
            &request("p", 1),
            &Backend::CacheOnly,
            &mut cache,
            &mut appender,
        )
        .unwrap_err();
        assert!(matches!(err, SamplerError::CacheMiss { .. }));
    }

    #[test]
    fn sample_seeds_differ_across_targets_and_indices() {
        let mut seen = HashSet::new();
        for id in ["0", "1", "2"] {
            for j in 0..5 {
                assert!(seen.insert(sample_seed(42, id, j)));
            }
        }
        assert_eq!(sample_seed(42, "0", 0), sample_seed(42, "0", 0));
        assert_ne!(sample_seed(42, "0", 0), sample_seed(43, "0", 0));
    }

    #[test]
    fn http_response_parsing_accepts_both_shapes() {
        let plain = serde_json::json!({"completions": ["a", "b"]});
        assert_eq!(
            HttpBackend::parse_completions(&plain).unwrap(),
            vec!["a", "b"]
        );
        let openai = serde_json::json!({"choices": [{"text": "x"}, {"text": "y"}]});
        assert_eq!(
            HttpBackend::parse_completions(&openai).unwrap(),
            vec!["x", "y"]
        );
        assert!(HttpBackend::parse_completions(&serde_json::json!({})).is_err());
        assert!(HttpBackend::parse_completions(&serde_json::json!({"completions": [1]})).is_err());
    }

    #[test]
    fn http_backend_rejects_non_http_urls() {
        assert!(matches!(
            HttpBackend::new("ftp://example", Duration::from_secs(1)),
            Err(SamplerError::InvalidUrl { .. })
        ));
    }
}
