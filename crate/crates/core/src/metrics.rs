//! Surface-similarity and information-content metrics.
//!
//! N-gram recall and precision use clipped counting: each reference n-gram
//! contributes at most `min(count_in_candidate, count_in_reference)` matches,
//! so repeated n-grams in the candidate cannot inflate the score. The
//! information-content metric is the bit length of the zlib-compressed text.

use core::fmt;

use miniz_oxide::deflate::compress_to_vec_zlib;
use serde::{Deserialize, Serialize};

use crate::textproc::{count_ngrams, WordSequence};

/// Default DEFLATE compression level used for entropy scoring.
pub const DEFAULT_ZLIB_LEVEL: u8 = 6;

/// Errors from metric computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricsError {
    /// The reference yields no n-grams of the requested order; the pair is
    /// unscorable and the caller decides whether to skip it or lower `n`.
    UnscorableReference { n: usize, len: usize },
    /// The candidate yields no n-grams of the requested order (precision
    /// denominators depend on the candidate).
    UnscorableCandidate { n: usize, len: usize },
    /// Compression level outside the DEFLATE range 0-9.
    InvalidLevel { level: u8 },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::UnscorableReference { n, len } => write!(
                f,
                "reference with {len} word(s) yields no {n}-grams; pair is unscorable"
            ),
            MetricsError::UnscorableCandidate { n, len } => write!(
                f,
                "candidate with {len} word(s) yields no {n}-grams; pair is unscorable"
            ),
            MetricsError::InvalidLevel { level } => {
                write!(f, "zlib level {level} outside the DEFLATE range 0-9")
            }
        }
    }
}

impl core::error::Error for MetricsError {}

/// Whether a similarity score normalizes by reference or candidate n-grams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Recall,
    Precision,
}

/// A clipped n-gram match ratio in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub n: usize,
    pub kind: MatchKind,
}

/// Validated DEFLATE compression level (0-9).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompressionLevel(u8);

impl CompressionLevel {
    pub fn new(level: u8) -> Result<Self, MetricsError> {
        if level <= 9 {
            Ok(CompressionLevel(level))
        } else {
            Err(MetricsError::InvalidLevel { level })
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl Default for CompressionLevel {
    fn default() -> Self {
        CompressionLevel(DEFAULT_ZLIB_LEVEL)
    }
}

impl fmt::Display for CompressionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bit length of a text after zlib compression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZlibEntropy {
    /// `8 * compressed_byte_length` of the UTF-8 encoding.
    pub bits: u64,
    /// Compression level the stream was produced with.
    pub level: u8,
}

/// Number of clipped n-gram matches between candidate and reference.
///
/// This is the shared numerator of [`rouge_n`] and [`precision_n`]: each
/// distinct reference n-gram contributes the minimum of its candidate and
/// reference multiplicities.
pub fn clipped_match_count(candidate: &WordSequence, reference: &WordSequence, n: usize) -> usize {
    let ref_counts = count_ngrams(reference, n);
    let cand_counts = count_ngrams(candidate, n);
    ref_counts
        .iter()
        .map(|(gram, ref_count)| ref_count.min(cand_counts.count(gram)))
        .sum()
}

/// N-gram recall of the reference found in the candidate, with clipped
/// counting. Ranges from 0 to 1.
pub fn rouge_n(
    candidate: &WordSequence,
    reference: &WordSequence,
    n: usize,
) -> Result<SimilarityScore, MetricsError> {
    let ref_total = count_ngrams(reference, n).total();
    if ref_total == 0 {
        return Err(MetricsError::UnscorableReference {
            n,
            len: reference.len(),
        });
    }
    let matched = clipped_match_count(candidate, reference, n);
    Ok(SimilarityScore {
        value: matched as f64 / ref_total as f64,
        n,
        kind: MatchKind::Recall,
    })
}

/// Same clipped match count as [`rouge_n`], normalized by the candidate's
/// n-gram total instead of the reference's.
pub fn precision_n(
    candidate: &WordSequence,
    reference: &WordSequence,
    n: usize,
) -> Result<SimilarityScore, MetricsError> {
    let cand_total = count_ngrams(candidate, n).total();
    if cand_total == 0 {
        return Err(MetricsError::UnscorableCandidate {
            n,
            len: candidate.len(),
        });
    }
    let matched = clipped_match_count(candidate, reference, n);
    Ok(SimilarityScore {
        value: matched as f64 / cand_total as f64,
        n,
        kind: MatchKind::Precision,
    })
}

/// Bit length of `text` after zlib compression of its UTF-8 encoding.
///
/// Deterministic for a fixed `(text, level)` pair. The empty text still
/// compresses to a non-empty stream (header, empty block, checksum).
pub fn zlib_bits(text: &str, level: CompressionLevel) -> ZlibEntropy {
    let compressed = compress_to_vec_zlib(text.as_bytes(), level.get());
    ZlibEntropy {
        bits: 8 * compressed.len() as u64,
        level: level.get(),
    }
}
