//! Membership scoring methods.
//!
//! Every method reduces one target text to a single `f64` under a shared
//! orientation contract: **higher score means more member-like**. Methods
//! whose natural statistic points the other way (perplexity- and NLL-based
//! ones) are negated here, so downstream ranking and threshold logic never
//! needs per-method special cases.
//!
//! Two families are implemented:
//!
//! * sampling-based: the target is split into a prefix and a reference half,
//!   a backend samples `m` continuations of the prefix, and the score
//!   aggregates n-gram recall of the reference across the samples
//!   ([`samia_score`], [`samia_zlib_score`]);
//! * likelihood-based: the score is a functional of per-token log-likelihoods
//!   produced by the scored model itself ([`loss_score`],
//!   [`lowercase_score`], [`ppl_zlib_score`], [`mink_score`]).
//!
//! All aggregation uses compensated summation, so scores are deterministic
//! and insensitive to the order candidates or tokens are supplied in.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metrics::{rouge_n, zlib_bits, CompressionLevel, MetricsError};
use crate::numeric::compensated_mean;
use crate::textproc::{tokenize, Casing, WordSequence};

/// Default fraction (percent) of lowest-likelihood tokens kept by
/// [`mink_score`].
pub const DEFAULT_K_PERCENT: f64 = 20.0;

/// Default number of sampled continuations per target.
pub const DEFAULT_NUM_SAMPLES: usize = 10;

/// Errors from score computation or input validation.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackError {
    /// The candidate set holds no sampled continuations.
    NoCandidates { target_id: String },
    /// The reference half yields no n-grams; the instance cannot be scored
    /// by the sampling-based methods at this `n`.
    Unscorable(MetricsError),
    /// `tokens` and `loglikes` arrays differ in length.
    LengthMismatch { tokens: usize, loglikes: usize },
    /// A log-likelihood is NaN or infinite.
    NonFiniteLogLike { index: usize, value: f64 },
    /// A log-likelihood is greater than zero (probability above one).
    PositiveLogLike { index: usize, value: f64 },
    /// A likelihood-based method received an empty token sequence.
    EmptyTokens,
    /// A method received the wrong text variant.
    VariantMismatch { expected: Variant, found: Variant },
    /// Paired log-likelihood records describe different targets.
    TargetMismatch { left: String, right: String },
    /// The perplexity ratio needs a non-empty text to compress.
    EmptyText,
    /// `k` outside the valid percentage range `(0, 100]`.
    InvalidKPercent { k: f64 },
    /// Method name not recognized by [`Method::from_str`].
    UnknownMethod { name: String },
    /// Variant or weighting name not recognized.
    UnknownVariant { name: String },
}

impl fmt::Display for AttackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackError::NoCandidates { target_id } => {
                write!(f, "no sampled continuations for target {target_id}")
            }
            AttackError::Unscorable(err) => write!(f, "instance unscorable: {err}"),
            AttackError::LengthMismatch { tokens, loglikes } => write!(
                f,
                "{tokens} token(s) but {loglikes} log-likelihood(s); arrays must align"
            ),
            AttackError::NonFiniteLogLike { index, value } => {
                write!(f, "non-finite log-likelihood {value} at index {index}")
            }
            AttackError::PositiveLogLike { index, value } => {
                write!(f, "positive log-likelihood {value} at index {index}")
            }
            AttackError::EmptyTokens => write!(f, "empty token sequence cannot be scored"),
            AttackError::VariantMismatch { expected, found } => {
                write!(f, "expected the {expected} text variant, got {found}")
            }
            AttackError::TargetMismatch { left, right } => {
                write!(
                    f,
                    "paired records describe different targets: {left} vs {right}"
                )
            }
            AttackError::EmptyText => write!(f, "empty text cannot be scored"),
            AttackError::InvalidKPercent { k } => {
                write!(f, "k percent {k} outside the range (0, 100]")
            }
            AttackError::UnknownMethod { name } => write!(
                f,
                "unknown method {name:?}; expected one of samia, samia_zlib, loss, lowercase, \
                 ppl_zlib, mink"
            ),
            AttackError::UnknownVariant { name } => {
                write!(f, "unknown variant {name:?}")
            }
        }
    }
}

impl core::error::Error for AttackError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            AttackError::Unscorable(err) => Some(err),
            _ => None,
        }
    }
}

impl From<MetricsError> for AttackError {
    fn from(err: MetricsError) -> Self {
        AttackError::Unscorable(err)
    }
}

/// The implemented scoring methods, in canonical reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Samia,
    SamiaZlib,
    Loss,
    Lowercase,
    PplZlib,
    Mink,
}

impl Method {
    /// All methods in canonical order (sampling-based first, then the
    /// likelihood baselines).
    pub fn all() -> [Method; 6] {
        [
            Method::Samia,
            Method::SamiaZlib,
            Method::Loss,
            Method::Lowercase,
            Method::PplZlib,
            Method::Mink,
        ]
    }

    /// Stable identifier used in CSV output and CLI arguments.
    pub fn id(self) -> &'static str {
        match self {
            Method::Samia => "samia",
            Method::SamiaZlib => "samia_zlib",
            Method::Loss => "loss",
            Method::Lowercase => "lowercase",
            Method::PplZlib => "ppl_zlib",
            Method::Mink => "mink",
        }
    }

    /// True for methods that consume sampled continuations rather than
    /// token log-likelihoods.
    pub fn needs_samples(self) -> bool {
        matches!(self, Method::Samia | Method::SamiaZlib)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::all()
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| AttackError::UnknownMethod {
                name: s.to_string(),
            })
    }
}

/// Sampling parameters forwarded to the generation backend.
///
/// Recorded verbatim in cache records and the run manifest so a cached
/// generation can be matched against the run that wants to reuse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub temperature: f64,
    pub max_length: u32,
    pub top_k: u32,
    pub top_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            temperature: 1.0,
            max_length: 1024,
            top_k: 50,
            top_p: 1.0,
            model_id: None,
        }
    }
}

/// Which text variant a log-likelihood record was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Original,
    Lowercase,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Original => f.write_str("original"),
            Variant::Lowercase => f.write_str("lowercase"),
        }
    }
}

impl FromStr for Variant {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Variant::Original),
            "lowercase" => Ok(Variant::Lowercase),
            other => Err(AttackError::UnknownVariant {
                name: other.to_string(),
            }),
        }
    }
}

/// Sampled continuations of one target's prefix, with the parameters that
/// produced them. Every candidate was sampled from the same prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub target_id: String,
    pub prefix_text: String,
    pub candidates: Vec<String>,
    pub gen_params: GenParams,
}

/// Per-token log-likelihoods for one text variant of one target, validated
/// on construction: arrays align, every value is finite and at most zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTokenLogLikelihoods")]
pub struct TokenLogLikelihoods {
    #[serde(rename = "id")]
    target_id: String,
    variant: Variant,
    tokens: Vec<String>,
    loglikes: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTokenLogLikelihoods {
    id: String,
    variant: Variant,
    tokens: Vec<String>,
    loglikes: Vec<f64>,
}

impl TryFrom<RawTokenLogLikelihoods> for TokenLogLikelihoods {
    type Error = AttackError;

    fn try_from(raw: RawTokenLogLikelihoods) -> Result<Self, Self::Error> {
        TokenLogLikelihoods::new(raw.id, raw.variant, raw.tokens, raw.loglikes)
    }
}

impl TokenLogLikelihoods {
    pub fn new(
        target_id: String,
        variant: Variant,
        tokens: Vec<String>,
        loglikes: Vec<f64>,
    ) -> Result<Self, AttackError> {
        if tokens.len() != loglikes.len() {
            return Err(AttackError::LengthMismatch {
                tokens: tokens.len(),
                loglikes: loglikes.len(),
            });
        }
        for (index, &value) in loglikes.iter().enumerate() {
            if !value.is_finite() {
                return Err(AttackError::NonFiniteLogLike { index, value });
            }
            if value > 0.0 {
                return Err(AttackError::PositiveLogLike { index, value });
            }
        }
        Ok(TokenLogLikelihoods {
            target_id,
            variant,
            tokens,
            loglikes,
        })
    }

    pub fn target_id(&self) -> &str {
        &self.target_id
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn loglikes(&self) -> &[f64] {
        &self.loglikes
    }

    pub fn len(&self) -> usize {
        self.loglikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loglikes.is_empty()
    }

    /// Compensated mean log-likelihood. Errors on an empty sequence.
    fn mean_loglike(&self) -> Result<f64, AttackError> {
        compensated_mean(&self.loglikes).ok_or(AttackError::EmptyTokens)
    }

    fn expect_variant(&self, expected: Variant) -> Result<(), AttackError> {
        if self.variant == expected {
            Ok(())
        } else {
            Err(AttackError::VariantMismatch {
                expected,
                found: self.variant,
            })
        }
    }
}

/// How [`samia_zlib_score`] combines n-gram recall with compressed size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZlibWeighting {
    /// `mean_j(recall_j * bits_j)`: each candidate's recall is weighted by
    /// that candidate's own compressed bit length before averaging.
    #[default]
    PerCandidate,
    /// `mean(recall) * mean(bits)`: the two factors are averaged
    /// independently and multiplied once. Alternative reading kept for
    /// experimentation; differs only when recall and entropy are
    /// correlated across candidates.
    MeanProduct,
}

impl ZlibWeighting {
    pub fn id(self) -> &'static str {
        match self {
            ZlibWeighting::PerCandidate => "per_candidate",
            ZlibWeighting::MeanProduct => "mean_product",
        }
    }
}

impl fmt::Display for ZlibWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ZlibWeighting {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per_candidate" => Ok(ZlibWeighting::PerCandidate),
            "mean_product" => Ok(ZlibWeighting::MeanProduct),
            other => Err(AttackError::UnknownVariant {
                name: other.to_string(),
            }),
        }
    }
}

/// One method's score for one target, oriented so higher means member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackScore {
    #[serde(rename = "id")]
    pub target_id: String,
    pub method: Method,
    pub score: f64,
    /// Scoring knobs that shaped this number, as `key=value` pairs joined
    /// with `;` (empty when the method has none).
    pub params: String,
}

/// Per-candidate n-gram recall against the reference half.
fn candidate_recalls(
    set: &CandidateSet,
    reference: &WordSequence,
    n: usize,
    casing: Casing,
) -> Result<Vec<f64>, AttackError> {
    if set.candidates.is_empty() {
        return Err(AttackError::NoCandidates {
            target_id: set.target_id.clone(),
        });
    }
    set.candidates
        .iter()
        .map(|candidate| {
            let words = tokenize(candidate, casing);
            Ok(rouge_n(&words, reference, n)?.value)
        })
        .collect()
}

/// Mean n-gram recall of the reference half across sampled continuations.
///
/// An exactly memorized target reproduces the reference from its prefix, so
/// members concentrate near 1 and unseen texts fall toward the model's base
/// overlap rate. Candidates that tokenize to nothing contribute recall 0
/// (they are legitimate model outputs); only a reference too short to form
/// any n-gram makes the instance unscorable.
pub fn samia_score(
    set: &CandidateSet,
    reference: &WordSequence,
    n: usize,
    casing: Casing,
) -> Result<AttackScore, AttackError> {
    let recalls = candidate_recalls(set, reference, n, casing)?;
    let score = compensated_mean(&recalls).expect("candidate set validated non-empty");
    Ok(AttackScore {
        target_id: set.target_id.clone(),
        method: Method::Samia,
        score,
        params: format!("m={};n={n};casing={casing}", recalls.len()),
    })
}

/// [`samia_score`] with each candidate's recall weighted by the candidate's
/// zlib-compressed bit length.
///
/// The weight is computed from the raw candidate text (pre-tokenization), so
/// it reflects the information content of what the model actually emitted.
/// Verbatim regurgitation of long, high-entropy references outscores short
/// or degenerate lookalikes with equal recall.
pub fn samia_zlib_score(
    set: &CandidateSet,
    reference: &WordSequence,
    n: usize,
    casing: Casing,
    level: CompressionLevel,
    weighting: ZlibWeighting,
) -> Result<AttackScore, AttackError> {
    let recalls = candidate_recalls(set, reference, n, casing)?;
    let bits: Vec<f64> = set
        .candidates
        .iter()
        .map(|candidate| zlib_bits(candidate, level).bits as f64)
        .collect();
    let score = match weighting {
        ZlibWeighting::PerCandidate => {
            let products: Vec<f64> = recalls.iter().zip(&bits).map(|(r, b)| r * b).collect();
            compensated_mean(&products).expect("candidate set validated non-empty")
        }
        ZlibWeighting::MeanProduct => {
            let mean_recall = compensated_mean(&recalls).expect("non-empty");
            let mean_bits = compensated_mean(&bits).expect("non-empty");
            mean_recall * mean_bits
        }
    };
    Ok(AttackScore {
        target_id: set.target_id.clone(),
        method: Method::SamiaZlib,
        score,
        params: format!(
            "m={};n={n};casing={casing};zlib_level={level};weighting={weighting}",
            recalls.len()
        ),
    })
}

/// Mean token log-likelihood of the original text. This is the negated
/// cross-entropy loss, so the member-oriented direction needs no further
/// sign flip.
pub fn loss_score(lls: &TokenLogLikelihoods) -> Result<AttackScore, AttackError> {
    lls.expect_variant(Variant::Original)?;
    Ok(AttackScore {
        target_id: lls.target_id.clone(),
        method: Method::Loss,
        score: lls.mean_loglike()?,
        params: String::new(),
    })
}

/// Mean log-likelihood of the original text minus that of its lowercased
/// variant.
///
/// Memorization is tied to exact surface form; casing perturbation hurts
/// members more than nonmembers, widening the gap for members. The two
/// records must describe the same target; their token counts may differ
/// because lowercasing changes tokenization.
pub fn lowercase_score(
    orig: &TokenLogLikelihoods,
    lower: &TokenLogLikelihoods,
) -> Result<AttackScore, AttackError> {
    orig.expect_variant(Variant::Original)?;
    lower.expect_variant(Variant::Lowercase)?;
    if orig.target_id != lower.target_id {
        return Err(AttackError::TargetMismatch {
            left: orig.target_id.clone(),
            right: lower.target_id.clone(),
        });
    }
    let score = orig.mean_loglike()? - lower.mean_loglike()?;
    Ok(AttackScore {
        target_id: orig.target_id.clone(),
        method: Method::Lowercase,
        score,
        params: String::new(),
    })
}

/// Negated ratio of perplexity to the text's zlib-compressed bit length.
///
/// Low perplexity relative to incompressible content indicates memorization;
/// the ratio is negated to honor the higher-is-member orientation. The
/// pipeline feeds the original text and its log-likelihoods. A non-empty
/// text never compresses to zero bits, so the division is always defined.
pub fn ppl_zlib_score(
    lls: &TokenLogLikelihoods,
    text: &str,
    level: CompressionLevel,
) -> Result<AttackScore, AttackError> {
    if text.is_empty() {
        return Err(AttackError::EmptyText);
    }
    let perplexity = libm::exp(-lls.mean_loglike()?);
    let bits = zlib_bits(text, level).bits as f64;
    Ok(AttackScore {
        target_id: lls.target_id.clone(),
        method: Method::PplZlib,
        score: -(perplexity / bits),
        params: format!("zlib_level={level}"),
    })
}

/// Mean log-likelihood of the `ceil(k% * len)` least likely tokens.
///
/// Members rarely contain tokens the model finds very surprising, so the
/// lower tail of their likelihood distribution sits higher. The sort is
/// stable (ties keep token order), at least one token is kept, and at
/// `k = 100` every token is kept and the score equals [`loss_score`].
pub fn mink_score(lls: &TokenLogLikelihoods, k_percent: f64) -> Result<AttackScore, AttackError> {
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(AttackError::InvalidKPercent { k: k_percent });
    }
    if lls.is_empty() {
        return Err(AttackError::EmptyTokens);
    }
    let keep = libm::ceil((k_percent / 100.0) * lls.len() as f64) as usize;
    let keep = keep.clamp(1, lls.len());
    let mut sorted = lls.loglikes().to_vec();
    sorted.sort_by(f64::total_cmp);
    let score = compensated_mean(&sorted[..keep]).expect("keep >= 1");
    Ok(AttackScore {
        target_id: lls.target_id.clone(),
        method: Method::Mink,
        score,
        params: format!("k_percent={k_percent}"),
    })
}
