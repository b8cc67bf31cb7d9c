//! Ingestion of externally produced token log-likelihoods.
//!
//! The likelihood baselines need per-token log-likelihoods that only a tool
//! with model access can compute. They arrive as JSONL, one record per
//! `(id, variant)` pair: `{"id", "variant": "original"|"lowercase",
//! "tokens", "loglikes"}`. Validation (alignment, finiteness, sign) happens
//! in the core deserializer; this module adds line numbers and duplicate
//! detection.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use samia_core::attacks::{TokenLogLikelihoods, Variant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoglikesError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {} invalid line(s): {}", lines.len(), lines.join("; "))]
    InvalidLines { path: String, lines: Vec<String> },
}

/// All log-likelihood records of one file, keyed by `(id, variant)`.
#[derive(Debug, Default)]
pub struct LogLikeStore {
    entries: HashMap<(String, Variant), TokenLogLikelihoods>,
}

impl LogLikeStore {
    pub fn get(&self, target_id: &str, variant: Variant) -> Option<&TokenLogLikelihoods> {
        self.entries.get(&(target_id.to_string(), variant))
    }

    /// Adds a record, returning the one it displaced if the `(id, variant)`
    /// key was already present.
    pub fn insert(&mut self, record: TokenLogLikelihoods) -> Option<TokenLogLikelihoods> {
        self.entries
            .insert((record.target_id().to_string(), record.variant()), record)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn load_loglikes(path: &Path) -> Result<LogLikeStore, LoglikesError> {
    let file = File::open(path).map_err(|source| LoglikesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut store = LogLikeStore::default();
    let mut bad_lines = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| LoglikesError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TokenLogLikelihoods>(&line) {
            Ok(record) => {
                if store.insert(record).is_some() {
                    bad_lines.push(format!("line {}: duplicate (id, variant) entry", idx + 1));
                }
            }
            Err(e) => bad_lines.push(format!("line {}: {e}", idx + 1)),
        }
    }
    if !bad_lines.is_empty() {
        return Err(LoglikesError::InvalidLines {
            path: path.display().to_string(),
            lines: bad_lines,
        });
    }
    Ok(store)
}
