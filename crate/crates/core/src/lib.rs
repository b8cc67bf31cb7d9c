//! Core scoring and evaluation primitives for membership inference on
//! text-generation models.
//!
//! Everything in this crate is a pure function over immutable inputs: word
//! tokenization and n-gram statistics ([`textproc`]), surface-similarity and
//! compression-entropy metrics ([`metrics`]), the six membership attack
//! scores ([`attacks`]), and the ROC/AUC evaluation machinery
//! ([`evaluation`]). IO, sampling backends, and file formats live in the
//! companion `samia` crate.
//!
//! The crate is `no_std` (with `alloc`) so the scoring core can be embedded
//! anywhere; determinism is part of the contract: identical inputs produce
//! bit-identical scores regardless of thread count or platform.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attacks;
pub mod evaluation;
pub mod metrics;
mod numeric;
pub mod textproc;

pub use attacks::{
    AttackScore, CandidateSet, GenParams, Method, TokenLogLikelihoods, Variant, ZlibWeighting,
};
pub use evaluation::{RocCurve, RocReport, Threshold};
pub use metrics::{CompressionLevel, SimilarityScore, ZlibEntropy};
pub use textproc::{Casing, NgramCounts, SplitText, WordSequence};
