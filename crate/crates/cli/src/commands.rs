//! The five pipeline commands. Each takes a resolved [`RunConfig`], talks
//! only to files (dataset, cache, loglikes, output directory), prints a
//! short summary to stdout and warnings to stderr, and returns a
//! [`Failure`] carrying the machine-readable error list on any failure.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Duration;

use samia_core::attacks::{GenParams, Method};
use samia_core::evaluation::{
    evaluate_group, CalibrationConfig, GroupEval, MethodSummary, RocCurve, RocReport,
};

use crate::config::{write_manifest, RunConfig, SweepAxis};
use crate::dataset::{
    check_against_published, compute_stats, load_dataset, DatasetError, TargetText,
};
use crate::errors::{ErrorItem, ErrorKind, Failure};
use crate::loglikes::{load_loglikes, LogLikeStore, LoglikesError};
use crate::output::{
    read_scores_csv, write_histogram_csv, write_report, write_roc_csv, write_scores_csv, ScoreRow,
};
use crate::sampler::{
    Backend, CacheAppender, CandidateCache, GenerationRecord, GenerationRequest, HttpBackend,
    MockBackend, MockSpec,
};
use crate::scoring::{parallel_map, score_dataset, split_instance};

fn print_warnings(warnings: &[String]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
}

fn dataset_failure(err: DatasetError) -> Failure {
    match err {
        DatasetError::InvalidLines { path, lines } => Failure::new(
            lines
                .into_iter()
                .map(|line| ErrorItem::new(ErrorKind::Data, format!("{path}: {line}")))
                .collect(),
        ),
        other => Failure::data(other.to_string()),
    }
}

fn loglikes_failure(err: LoglikesError) -> Failure {
    match err {
        LoglikesError::InvalidLines { path, lines } => Failure::new(
            lines
                .into_iter()
                .map(|line| ErrorItem::new(ErrorKind::Data, format!("{path}: {line}")))
                .collect(),
        ),
        other => Failure::data(other.to_string()),
    }
}

fn load_dataset_checked(config: &RunConfig) -> Result<Vec<TargetText>, Failure> {
    load_dataset(&config.dataset).map_err(dataset_failure)
}

/// Builds the generation backend from `--backend-url`: `mock`, `cache`, or
/// an http(s) endpoint.
pub fn build_backend(config: &RunConfig, dataset: &[TargetText]) -> Result<Backend, Failure> {
    let url = config
        .backend_url
        .as_deref()
        .ok_or_else(|| Failure::config("--backend-url is required for generation"))?;
    match url {
        "mock" => {
            let mut specs = HashMap::new();
            for instance in dataset {
                if let Some((_, reference)) = split_instance(&instance.text, config.prefix_ratio) {
                    let corruption_rate = if instance.label.is_member() {
                        config.mock_member_rate
                    } else {
                        config.mock_nonmember_rate
                    };
                    specs.insert(
                        instance.id.clone(),
                        MockSpec {
                            reference: reference.join(),
                            corruption_rate,
                        },
                    );
                }
            }
            Ok(Backend::Mock(MockBackend {
                seed: config.seed,
                specs,
            }))
        }
        "cache" => Ok(Backend::CacheOnly),
        url => HttpBackend::new(url, Duration::from_secs(config.timeout_secs))
            .map(Backend::Http)
            .map_err(|e| Failure::config(e.to_string())),
    }
}

fn generation_request(config: &RunConfig, prompt: String) -> GenerationRequest {
    GenerationRequest {
        prompt,
        num_samples: config.samples,
        params: GenParams {
            model_id: config.model_id.clone(),
            ..GenParams::default()
        },
    }
}

/// Populates the candidate cache for every splittable instance. Resumable:
/// instances whose `(id, prompt)` record already holds enough completions
/// are not re-requested. Any failed instance makes the command fail with a
/// per-instance backend error list after all instances were attempted.
pub fn cmd_generate(config: &RunConfig) -> Result<(), Failure> {
    config.validate()?;
    let dataset = load_dataset_checked(config)?;
    let backend = build_backend(config, &dataset)?;
    let cache_path = config
        .cache
        .as_deref()
        .ok_or_else(|| Failure::config("--cache is required for generation"))?;
    let mut cache = CandidateCache::load(cache_path).map_err(|e| Failure::data(e.to_string()))?;
    let mut appender = CacheAppender::open(cache_path).map_err(|e| Failure::data(e.to_string()))?;

    let mut warnings = Vec::new();
    let mut reused = 0usize;
    // (dataset index, request) for every instance still needing generation
    let mut todo: Vec<(usize, GenerationRequest)> = Vec::new();
    for (idx, instance) in dataset.iter().enumerate() {
        let Some((prompt, _)) = split_instance(&instance.text, config.prefix_ratio) else {
            warnings.push(format!(
                "instance {}: fewer than 2 words, cannot split; not generated",
                instance.id
            ));
            continue;
        };
        let request = generation_request(config, prompt);
        match cache.lookup(&instance.id, &request.prompt) {
            Some(record) if record.completions.len() >= request.num_samples => reused += 1,
            _ => todo.push((idx, request)),
        }
    }

    let results = parallel_map(&todo, config.jobs, |(idx, request)| {
        let id = &dataset[*idx].id;
        match &backend {
            // fetch reports the precise reason: miss, prompt mismatch, or shortfall
            Backend::CacheOnly => cache
                .fetch(id, &request.prompt, request.num_samples)
                .map(|record| record.completions.clone()),
            backend => backend.generate(id, request),
        }
    });

    let mut errors = Vec::new();
    let mut generated = 0usize;
    for ((idx, request), result) in todo.into_iter().zip(results) {
        let id = &dataset[idx].id;
        match result {
            Ok(completions) => {
                if matches!(backend, Backend::CacheOnly) {
                    // record already cached; nothing to append
                    reused += 1;
                    continue;
                }
                let record = GenerationRecord {
                    target_id: id.clone(),
                    request,
                    completions,
                    timestamp: chrono::Utc::now(),
                    backend: backend.tag(),
                };
                appender
                    .append(&record)
                    .map_err(|e| Failure::data(e.to_string()))?;
                cache.insert(record);
                generated += 1;
            }
            Err(err) => errors.push(ErrorItem::for_target(
                ErrorKind::Backend,
                id.clone(),
                err.to_string(),
            )),
        }
    }

    write_manifest(config)?;
    print_warnings(&warnings);
    println!(
        "generate: {generated} generated, {reused} reused, {} skipped, {} failed; cache at {}",
        warnings.len(),
        errors.len(),
        cache_path.display()
    );
    if !errors.is_empty() {
        return Err(Failure::new(errors));
    }
    Ok(())
}

/// Scores every (instance, method) pair into `<out>/scores.csv`.
pub fn cmd_score(config: &RunConfig) -> Result<(), Failure> {
    config.validate()?;
    let dataset = load_dataset_checked(config)?;
    let needs_cache = config.methods.iter().any(|m| m.needs_samples());
    let cache = match (&config.cache, needs_cache) {
        (Some(path), _) => {
            Some(CandidateCache::load(path).map_err(|e| Failure::data(e.to_string()))?)
        }
        (None, true) => {
            return Err(Failure::config(
                "--cache is required when scoring sampling methods",
            ))
        }
        (None, false) => None,
    };
    let loglikes = match &config.loglikes {
        Some(path) => Some(load_loglikes(path).map_err(loglikes_failure)?),
        None => None,
    };
    let outcome = score_dataset(config, &dataset, cache.as_ref(), loglikes.as_ref())?;
    let scores_path = config.scores_path();
    write_scores_csv(&scores_path, &outcome.rows)?;
    write_manifest(config)?;
    print_warnings(&outcome.warnings);
    let methods_written = {
        let mut seen: Vec<Method> = Vec::new();
        for row in &outcome.rows {
            if !seen.contains(&row.method) {
                seen.push(row.method);
            }
        }
        seen.len()
    };
    println!(
        "score: {} rows across {} method(s) to {}",
        outcome.rows.len(),
        methods_written,
        scores_path.display()
    );
    Ok(())
}

/// Everything `cmd_evaluate` derives from one scores file.
#[derive(Debug)]
pub struct Evaluation {
    pub report: RocReport,
    pub curves: Vec<(Method, String, RocCurve)>,
    pub histograms: Vec<(Method, Vec<(f64, bool)>)>,
    pub warnings: Vec<String>,
}

/// Groups score rows by method and length group, evaluates each group, and
/// assembles the report. Skipped counts are derived: instances of a group
/// with no score row for the method.
pub fn evaluate_scores(
    config: &RunConfig,
    dataset: &[TargetText],
    rows: &[ScoreRow],
) -> Result<Evaluation, Failure> {
    let by_id: HashMap<&str, &TargetText> = dataset.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut group_sizes: BTreeMap<u32, usize> = BTreeMap::new();
    for instance in dataset {
        *group_sizes.entry(instance.length_group).or_default() += 1;
    }

    // method -> group -> labeled scores, in row order
    let mut per_method: HashMap<Method, BTreeMap<u32, Vec<(f64, bool)>>> = HashMap::new();
    let mut errors = Vec::new();
    for row in rows {
        if !config.methods.contains(&row.method) {
            continue;
        }
        let Some(instance) = by_id.get(row.id.as_str()) else {
            errors.push(ErrorItem::for_target(
                ErrorKind::Data,
                row.id.clone(),
                format!(
                    "score row references an id not in {}",
                    config.dataset.display()
                ),
            ));
            continue;
        };
        per_method
            .entry(row.method)
            .or_default()
            .entry(instance.length_group)
            .or_default()
            .push((row.score, instance.label.is_member()));
    }
    if !errors.is_empty() {
        return Err(Failure::new(errors));
    }

    let calibration = CalibrationConfig {
        dev_fraction: config.dev_fraction,
        seed: config.seed,
    };
    let mut warnings = Vec::new();
    let mut methods = Vec::new();
    let mut curves = Vec::new();
    let mut histograms = Vec::new();
    for &method in &config.methods {
        let Some(groups) = per_method.get(&method) else {
            warnings.push(format!(
                "method {}: no score rows; not evaluated",
                method.id()
            ));
            continue;
        };
        let mut evals: Vec<GroupEval> = Vec::new();
        let mut all_scores: Vec<(f64, bool)> = Vec::new();
        for (&group, scores) in groups {
            let skipped = group_sizes[&group] - scores.len();
            let name = group.to_string();
            let eval = evaluate_group(&name, scores, skipped, config.fpr_budget, calibration)
                .map_err(|e| Failure::data(format!("method {} group {name}: {e}", method.id())))?;
            if config.roc_csv {
                let curve = RocCurve::from_scores(scores).map_err(|e| {
                    Failure::data(format!("method {} group {name}: {e}", method.id()))
                })?;
                curves.push((method, name.clone(), curve));
            }
            all_scores.extend_from_slice(scores);
            evals.push(eval);
        }
        for (&group, &size) in &group_sizes {
            if !groups.contains_key(&group) && size > 0 {
                warnings.push(format!(
                    "method {}: group {group} has no score rows; omitted",
                    method.id()
                ));
            }
        }
        let summary = MethodSummary::from_groups(method, evals)
            .map_err(|e| Failure::data(format!("method {}: {e}", method.id())))?;
        methods.push(summary);
        if config.hist_csv {
            histograms.push((method, all_scores));
        }
    }
    if methods.is_empty() {
        return Err(Failure::data(
            "scores file contains no rows for any requested method",
        ));
    }
    let report = RocReport {
        fpr_budget: config.fpr_budget,
        methods,
        metadata: config.report_metadata(),
    };
    Ok(Evaluation {
        report,
        curves,
        histograms,
        warnings,
    })
}

/// Builds the ROC/AUC report from a scores file and writes it as JSON and
/// aligned text (plus optional ROC-point and histogram CSVs).
pub fn cmd_evaluate(config: &RunConfig) -> Result<(), Failure> {
    config.validate()?;
    let dataset = load_dataset_checked(config)?;
    let rows = read_scores_csv(&config.scores_path())?;
    let evaluation = evaluate_scores(config, &dataset, &rows)?;
    let (json_path, _) = write_report(&config.out, "report", &evaluation.report)?;
    if config.roc_csv {
        write_roc_csv(&config.out.join("roc.csv"), &evaluation.curves)?;
    }
    if config.hist_csv {
        write_histogram_csv(&config.out.join("hist.csv"), &evaluation.histograms)?;
    }
    write_manifest(config)?;
    print_warnings(&evaluation.warnings);
    print!("{}", evaluation.report);
    println!("evaluate: report at {}", json_path.display());
    Ok(())
}

fn sweep_config(base: &RunConfig, axis: SweepAxis, value: f64) -> RunConfig {
    let mut config = base.clone();
    match axis {
        SweepAxis::N => config.n = value as usize,
        SweepAxis::M => config.samples = value as usize,
        SweepAxis::PrefixRatio => config.prefix_ratio = value,
    }
    config
}

fn sweep_label(axis: SweepAxis, value: f64) -> String {
    match axis {
        SweepAxis::N | SweepAxis::M => format!("{}_{}", axis.id(), value as usize),
        SweepAxis::PrefixRatio => format!("{}_{}", axis.id(), value),
    }
}

/// Scores and evaluates once per axis value, emitting one report per value.
/// The m-sweep reuses the first j cached completions per instance and fails
/// if a requested m exceeds what the cache holds.
pub fn cmd_sweep(config: &RunConfig) -> Result<(), Failure> {
    config.validate()?;
    let axis = config
        .sweep_axis
        .ok_or_else(|| Failure::config("sweep requires --axis"))?;
    if config.sweep_values.is_empty() {
        return Err(Failure::config("sweep requires --values"));
    }
    let dataset = load_dataset_checked(config)?;
    let cache_path = config
        .cache
        .as_deref()
        .ok_or_else(|| Failure::config("--cache is required for sweeps"))?;
    let cache = CandidateCache::load(cache_path).map_err(|e| Failure::data(e.to_string()))?;
    let loglikes: Option<LogLikeStore> = match &config.loglikes {
        Some(path) => Some(load_loglikes(path).map_err(loglikes_failure)?),
        None => None,
    };

    write_manifest(config)?;
    for &value in &config.sweep_values {
        let label = sweep_label(axis, value);
        let mut point = sweep_config(config, axis, value);
        point.scores = Some(config.out.join(format!("scores_{label}.csv")));
        let outcome = score_dataset(&point, &dataset, Some(&cache), loglikes.as_ref())?;
        write_scores_csv(&point.scores_path(), &outcome.rows)?;
        print_warnings(&outcome.warnings);
        let csv_rows: Vec<ScoreRow> = outcome
            .rows
            .iter()
            .map(|row| ScoreRow {
                id: row.target_id.clone(),
                method: row.method,
                score: row.score,
                params: row.params.clone(),
            })
            .collect();
        let evaluation = evaluate_scores(&point, &dataset, &csv_rows)?;
        print_warnings(&evaluation.warnings);
        let (json_path, _) =
            write_report(&config.out, &format!("report_{label}"), &evaluation.report)?;
        let summary: Vec<String> = evaluation
            .report
            .methods
            .iter()
            .map(|m| format!("{} auc={:.4}", m.method.id(), m.macro_auc))
            .collect();
        println!(
            "sweep {label}: {} ({})",
            json_path.display(),
            summary.join(", ")
        );
    }
    Ok(())
}

/// Prints per-group dataset statistics as JSON; with `check_published`
/// set, compares them against the published WikiMIA table.
pub fn cmd_stats(
    dataset_path: &Path,
    out: Option<&Path>,
    check_published: bool,
) -> Result<(), Failure> {
    let dataset = load_dataset(dataset_path).map_err(dataset_failure)?;
    let stats = compute_stats(&dataset);
    let mut value = serde_json::json!({ "stats": stats });
    if check_published {
        let checks = check_against_published(&stats);
        for check in &checks {
            if let Some(note) = &check.note {
                eprintln!("warning: {note}");
            }
        }
        value["published_check"] = serde_json::to_value(checks).expect("check serialization");
    }
    let rendered = format!(
        "{}\n",
        serde_json::to_string_pretty(&value).expect("stats serialization")
    );
    if let Some(out) = out {
        crate::output::write_atomic(&out.join("stats.json"), rendered.as_bytes())?;
    }
    print!("{rendered}");
    Ok(())
}
