//! Batch scoring: every configured method against every dataset instance.
//!
//! Rows are emitted method-major in configuration order, instances in
//! dataset order, so repeated runs over the same inputs produce identical
//! files. Instances a method cannot score (too short to split, reference
//! shorter than the n-gram order, missing log-likelihood variants) are
//! skipped with a warning; broken inputs (missing or mismatched cache
//! records) are hard errors collected per instance.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use samia_core::attacks::{
    loss_score, lowercase_score, mink_score, ppl_zlib_score, samia_score, samia_zlib_score,
    AttackError, AttackScore, CandidateSet, Method, Variant,
};
use samia_core::metrics::MetricsError;
use samia_core::textproc::{tokenize, Casing, WordSequence};

use crate::config::RunConfig;
use crate::dataset::TargetText;
use crate::errors::{ErrorItem, ErrorKind, Failure};
use crate::loglikes::LogLikeStore;
use crate::sampler::CandidateCache;

/// Runs `f` over `items` with up to `jobs` worker threads, preserving input
/// order in the result; with one job it degenerates to a plain map.
pub fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= items.len() {
                    break;
                }
                let result = f(&items[idx]);
                *slots[idx].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every slot filled"))
        .collect()
}

/// Prompt prefix and reference half of one instance, or `None` when the
/// text is too short to form both.
pub fn split_instance(text: &str, ratio: f64) -> Option<(String, WordSequence)> {
    tokenize(text, Casing::Preserve)
        .split_prefix_reference(ratio)
        .ok()
        .map(|split| (split.prefix.join(), split.reference))
}

enum InstanceOutcome {
    Scored(AttackScore),
    Skipped(String),
    Failed(ErrorItem),
}

fn score_sampling_instance(
    config: &RunConfig,
    method: Method,
    instance: &TargetText,
    cache: &CandidateCache,
) -> InstanceOutcome {
    let Some((prompt, reference)) = split_instance(&instance.text, config.prefix_ratio) else {
        return InstanceOutcome::Skipped(format!(
            "{}: instance {}: fewer than 2 words, cannot split",
            method.id(),
            instance.id
        ));
    };
    let record = match cache.fetch(&instance.id, &prompt, config.samples) {
        Ok(record) => record,
        Err(err) => {
            return InstanceOutcome::Failed(ErrorItem::for_target(
                ErrorKind::Data,
                instance.id.clone(),
                err.to_string(),
            ))
        }
    };
    let set = CandidateSet {
        target_id: instance.id.clone(),
        prefix_text: prompt,
        candidates: record.completions[..config.samples].to_vec(),
        gen_params: record.request.params.clone(),
    };
    // re-tokenizing the joined reference applies the configured casing
    let reference = tokenize(&reference.join(), config.casing);
    let result = match method {
        Method::Samia => samia_score(&set, &reference, config.n, config.casing),
        Method::SamiaZlib => samia_zlib_score(
            &set,
            &reference,
            config.n,
            config.casing,
            config.zlib_level,
            config.zlib_weighting,
        ),
        other => unreachable!("{other} is not a sampling method"),
    };
    match result {
        Ok(score) => InstanceOutcome::Scored(score),
        Err(AttackError::Unscorable(MetricsError::UnscorableReference { n, len })) => {
            InstanceOutcome::Skipped(format!(
                "{}: instance {}: reference has {len} word(s), no {n}-grams to match",
                method.id(),
                instance.id
            ))
        }
        Err(err) => InstanceOutcome::Failed(ErrorItem::for_target(
            ErrorKind::Data,
            instance.id.clone(),
            err.to_string(),
        )),
    }
}

fn score_likelihood_instance(
    config: &RunConfig,
    method: Method,
    instance: &TargetText,
    store: &LogLikeStore,
) -> InstanceOutcome {
    let skip = |what: &str| {
        InstanceOutcome::Skipped(format!("{}: instance {}: {what}", method.id(), instance.id))
    };
    let Some(original) = store.get(&instance.id, Variant::Original) else {
        return skip("no original-variant log-likelihoods");
    };
    let result = match method {
        Method::Loss => loss_score(original),
        Method::Lowercase => match store.get(&instance.id, Variant::Lowercase) {
            Some(lower) => lowercase_score(original, lower),
            None => return skip("no lowercase-variant log-likelihoods"),
        },
        Method::PplZlib => ppl_zlib_score(original, &instance.text, config.zlib_level),
        Method::Mink => mink_score(original, config.k_percent),
        other => unreachable!("{other} is not a likelihood method"),
    };
    match result {
        Ok(score) => InstanceOutcome::Scored(score),
        Err(err) => InstanceOutcome::Failed(ErrorItem::for_target(
            ErrorKind::Data,
            instance.id.clone(),
            err.to_string(),
        )),
    }
}

#[derive(Debug, Default)]
pub struct ScoreOutcome {
    pub rows: Vec<AttackScore>,
    pub warnings: Vec<String>,
}

/// Scores the dataset with every configured method. Sampling methods
/// require a cache; likelihood methods are skipped with a warning when no
/// log-likelihood store was supplied.
pub fn score_dataset(
    config: &RunConfig,
    dataset: &[TargetText],
    cache: Option<&CandidateCache>,
    loglikes: Option<&LogLikeStore>,
) -> Result<ScoreOutcome, Failure> {
    let mut outcome = ScoreOutcome::default();
    let mut errors = Vec::new();
    for &method in &config.methods {
        let results = if method.needs_samples() {
            let Some(cache) = cache else {
                return Err(Failure::config(format!(
                    "method {} requires a candidate cache (--cache)",
                    method.id()
                )));
            };
            parallel_map(dataset, config.jobs, |instance| {
                score_sampling_instance(config, method, instance, cache)
            })
        } else {
            let Some(store) = loglikes else {
                outcome.warnings.push(format!(
                    "method {} skipped: no log-likelihood file provided (--loglikes)",
                    method.id()
                ));
                continue;
            };
            parallel_map(dataset, config.jobs, |instance| {
                score_likelihood_instance(config, method, instance, store)
            })
        };
        for result in results {
            match result {
                InstanceOutcome::Scored(row) => outcome.rows.push(row),
                InstanceOutcome::Skipped(warning) => outcome.warnings.push(warning),
                InstanceOutcome::Failed(item) => errors.push(item),
            }
        }
    }
    if !errors.is_empty() {
        return Err(Failure::new(errors));
    }
    Ok(outcome)
}
