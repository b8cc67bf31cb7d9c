//! Word tokenization, prefix/reference splitting, and n-gram counting.
//!
//! Texts are treated as sequences of words obtained by splitting on runs of
//! Unicode whitespace. A target text is split by word count into a prefix
//! (fed to the model as a prompt) and a reference (the held-out continuation
//! the sampled candidates are scored against). N-grams are counted as
//! multisets so that clipped matching can bound each match by the reference
//! multiplicity.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Case handling applied during tokenization.
///
/// Lowercasing is the conventional choice for n-gram recall metrics; the
/// preserve variant is kept so runs can be compared under both conventions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Casing {
    Preserve,
    #[default]
    Lowercase,
}

impl fmt::Display for Casing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Casing::Preserve => write!(f, "preserve"),
            Casing::Lowercase => write!(f, "lowercase"),
        }
    }
}

impl core::str::FromStr for Casing {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "preserve" => Ok(Casing::Preserve),
            "lowercase" => Ok(Casing::Lowercase),
            _ => Err(TextError::UnknownCasing {
                name: s.to_string(),
            }),
        }
    }
}

/// Errors from text processing operations.
#[derive(Debug, Clone, PartialEq)]
pub enum TextError {
    /// A sequence with fewer than two words cannot form both a prefix and a
    /// reference; the instance is unusable.
    TooShort { len: usize },
    /// The split ratio must lie strictly between 0 and 1.
    InvalidRatio { ratio: f64 },
    /// A word supplied to [`WordSequence::from_words`] would not survive a
    /// join-and-retokenize round trip (empty or contains whitespace).
    UnstableWord { word: String },
    /// Unrecognized casing name.
    UnknownCasing { name: String },
}

impl fmt::Display for TextError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TextError::TooShort { len } => {
                write!(f, "sequence has {len} word(s); need at least 2 to split")
            }
            TextError::InvalidRatio { ratio } => {
                write!(f, "split ratio {ratio} is outside the open interval (0, 1)")
            }
            TextError::UnstableWord { word } => {
                write!(
                    f,
                    "word {word:?} is not stable under whitespace tokenization"
                )
            }
            TextError::UnknownCasing { name } => {
                write!(
                    f,
                    "unknown casing {name:?} (expected preserve or lowercase)"
                )
            }
        }
    }
}

impl core::error::Error for TextError {}

/// An ordered sequence of word tokens.
///
/// Instances are only constructed through [`tokenize`] or
/// [`WordSequence::from_words`], which guarantees that joining the words with
/// single spaces and re-tokenizing yields the same sequence back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSequence {
    words: Vec<String>,
}

impl WordSequence {
    /// Build a sequence from pre-split words, validating that each word is
    /// non-empty and free of whitespace.
    pub fn from_words<I, S>(words: I) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        for word in &words {
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(TextError::UnstableWord { word: word.clone() });
            }
        }
        Ok(WordSequence { words })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Word count `T` of the sequence.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words joined with single spaces. Tokenizing the result with
    /// [`Casing::Preserve`] reproduces this sequence exactly.
    pub fn join(&self) -> String {
        self.words.join(" ")
    }

    /// Split into a prefix of `floor(ratio * T)` words (clamped so neither
    /// side is empty) and the remaining reference.
    pub fn split_prefix_reference(&self, ratio: f64) -> Result<SplitText, TextError> {
        let total = self.len();
        if total < 2 {
            return Err(TextError::TooShort { len: total });
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(TextError::InvalidRatio { ratio });
        }
        let raw = (ratio * total as f64) as usize; // floor for non-negative values
        let prefix_len = raw.clamp(1, total - 1);
        let prefix = WordSequence {
            words: self.words[..prefix_len].to_vec(),
        };
        let reference = WordSequence {
            words: self.words[prefix_len..].to_vec(),
        };
        Ok(SplitText {
            prefix,
            reference,
            split_ratio: ratio,
        })
    }

    /// Sliding-window n-grams of order `n`, counted with multiplicity.
    ///
    /// A sequence shorter than `n` yields empty counts with total 0.
    pub fn ngrams(&self, n: usize) -> NgramCounts<'_> {
        count_ngrams(self, n)
    }
}

/// Split text into a prompt prefix and the reference continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitText {
    pub prefix: WordSequence,
    pub reference: WordSequence,
    pub split_ratio: f64,
}

/// Tokenize `text` by splitting on runs of Unicode whitespace.
///
/// Empty input yields an empty sequence. With [`Casing::Lowercase`] every
/// token is mapped to its Unicode lowercase form.
pub fn tokenize(text: &str, casing: Casing) -> WordSequence {
    let words = text
        .split_whitespace()
        .map(|w| match casing {
            Casing::Preserve => w.to_string(),
            Casing::Lowercase => w.to_lowercase(),
        })
        .collect();
    WordSequence { words }
}

/// Multiset of n-grams for one word sequence.
///
/// Keys borrow windows of the source sequence, so counts are zero-copy and
/// live no longer than the sequence they were taken from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramCounts<'a> {
    n: usize,
    counts: BTreeMap<&'a [String], usize>,
    total: usize,
}

impl<'a> NgramCounts<'a> {
    /// N-gram order.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of n-grams, `max(0, T - n + 1)`.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Occurrence count of one n-gram (0 when absent).
    pub fn count(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Distinct n-grams with their multiplicities.
    pub fn iter(&self) -> impl Iterator<Item = (&'a [String], usize)> + '_ {
        self.counts.iter().map(|(&gram, &count)| (gram, count))
    }
}

/// Count sliding-window n-grams of order `n` with multiplicity.
///
/// # Panics
///
/// Panics if `n == 0`; an n-gram order of zero is meaningless.
pub fn count_ngrams(ws: &WordSequence, n: usize) -> NgramCounts<'_> {
    assert!(n >= 1, "n-gram order must be >= 1");
    let mut counts: BTreeMap<&[String], usize> = BTreeMap::new();
    let mut total = 0;
    if ws.len() >= n {
        for window in ws.words().windows(n) {
            *counts.entry(window).or_insert(0) += 1;
            total += 1;
        }
    }
    NgramCounts { n, counts, total }
}
