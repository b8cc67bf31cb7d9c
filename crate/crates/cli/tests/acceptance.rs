//! Acceptance gate: every release requirement, one test per criterion.
//!
//! Each test prints one `ACCEPTANCE PASS <name>` line on success (visible
//! with `--nocapture`); a failed assertion is the corresponding FAIL. The
//! metric and AUC criteria check the library against independent
//! brute-force oracles implemented here; the pipeline criteria drive the
//! compiled binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use samia_core::attacks::{loss_score, mink_score, TokenLogLikelihoods, Variant};
use samia_core::evaluation::RocCurve;
use samia_core::metrics::{precision_n, rouge_n};
use samia_core::textproc::{tokenize, Casing};
use serde_json::Value;
use tempfile::TempDir;

fn pass(name: &str, details: impl std::fmt::Display) {
    println!("ACCEPTANCE PASS {name}: {details}");
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_samia"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "command failed with {:?}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn write_dataset(path: &Path, rows: &[(String, String, u8)]) {
    let mut out = String::new();
    for (id, text, label) in rows {
        out.push_str(&serde_json::json!({"id": id, "text": text, "label": label}).to_string());
        out.push('\n');
    }
    fs::write(path, out).unwrap();
}

fn random_text(rng: &mut ChaCha8Rng, words: usize) -> String {
    const VOCAB: [&str; 32] = [
        "river", "stone", "cloud", "meadow", "lantern", "harbor", "salt", "ember", "willow",
        "frost", "cedar", "march", "quiet", "vessel", "orchard", "thistle", "gleam", "hollow",
        "brim", "paddock", "mill", "copper", "shade", "ridge", "loam", "drift", "pike", "ford",
        "heath", "crag", "fen", "moss",
    ];
    (0..words)
        .map(|_| VOCAB[rng.gen_range(0..VOCAB.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn report_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn method_summary<'v>(report: &'v Value, method: &str) -> &'v Value {
    report["methods"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["method"] == method)
        .unwrap_or_else(|| panic!("method {method} missing from report"))
}

fn csv_scores(path: &Path) -> Vec<(String, String, f64)> {
    let mut rows = Vec::new();
    let mut reader = csv::Reader::from_path(path).unwrap();
    for row in reader.records() {
        let row = row.unwrap();
        rows.push((
            row[0].to_string(),
            row[1].to_string(),
            row[2].parse::<f64>().unwrap(),
        ));
    }
    rows
}

// Brute-force clipped n-gram counting: no hashing, no sharing with the
// library implementation. Returns (matched, candidate_total,
// reference_total).
fn oracle_clipped_counts(
    candidate: &[String],
    reference: &[String],
    n: usize,
) -> (usize, usize, usize) {
    fn grams(words: &[String], n: usize) -> Vec<&[String]> {
        if words.len() < n {
            Vec::new()
        } else {
            (0..=words.len() - n).map(|i| &words[i..i + n]).collect()
        }
    }
    let cand = grams(candidate, n);
    let reference = grams(reference, n);
    let mut matched = 0;
    let mut seen: Vec<&[String]> = Vec::new();
    for gram in &reference {
        if seen.iter().any(|s| s == gram) {
            continue;
        }
        seen.push(gram);
        let in_ref = reference.iter().filter(|g: &&&[String]| *g == gram).count();
        let in_cand = cand.iter().filter(|g: &&&[String]| *g == gram).count();
        matched += in_ref.min(in_cand);
    }
    (matched, cand.len(), reference.len())
}

#[test]
fn overlap_metrics_match_brute_force_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11_CE00);
    let alphabet = ["a", "b", "c", "d", "e"];
    let mut checked = 0usize;
    for _ in 0..1000 {
        let draw = |rng: &mut ChaCha8Rng| -> Vec<String> {
            let len = rng.gen_range(1..=30);
            (0..len)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())].to_string())
                .collect()
        };
        let cand_words = draw(&mut rng);
        let ref_words = draw(&mut rng);
        let cand = tokenize(&cand_words.join(" "), Casing::Preserve);
        let reference = tokenize(&ref_words.join(" "), Casing::Preserve);
        for n in 1..=3 {
            let (matched, cand_total, ref_total) =
                oracle_clipped_counts(&cand_words, &ref_words, n);
            match rouge_n(&cand, &reference, n) {
                Ok(score) => {
                    assert!(ref_total > 0);
                    let expected = matched as f64 / ref_total as f64;
                    assert!(
                        (score.value - expected).abs() <= 1e-12,
                        "recall mismatch at n={n}: {} vs oracle {expected}",
                        score.value
                    );
                }
                Err(_) => assert_eq!(ref_total, 0, "spurious recall error at n={n}"),
            }
            match precision_n(&cand, &reference, n) {
                Ok(score) => {
                    assert!(cand_total > 0);
                    let expected = matched as f64 / cand_total as f64;
                    assert!(
                        (score.value - expected).abs() <= 1e-12,
                        "precision mismatch at n={n}: {} vs oracle {expected}",
                        score.value
                    );
                }
                Err(_) => assert_eq!(cand_total, 0, "spurious precision error at n={n}"),
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "oracle sweep took {elapsed:?}"
    );
    pass(
        "overlap-metric-oracle",
        format!("{checked} comparisons within 1e-12 in {elapsed:?}"),
    );
}

#[test]
fn auc_matches_pairwise_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11_CE01);
    for case in 0..200 {
        let len = rng.gen_range(2..=200);
        let mut scores: Vec<(f64, bool)> = (0..len)
            .map(|_| {
                // Coarse grid forces plenty of exact ties.
                let value = f64::from(rng.gen_range(-6..=6)) * 0.25;
                (value, rng.gen_bool(0.5))
            })
            .collect();
        // Both classes must be present for the curve to exist.
        scores[0].1 = true;
        scores[1].1 = false;

        let members: Vec<f64> = scores.iter().filter(|(_, l)| *l).map(|(s, _)| *s).collect();
        let nonmembers: Vec<f64> = scores
            .iter()
            .filter(|(_, l)| !*l)
            .map(|(s, _)| *s)
            .collect();
        let mut favorable = 0.0;
        for &m in &members {
            for &n in &nonmembers {
                if m > n {
                    favorable += 1.0;
                } else if m == n {
                    favorable += 0.5;
                }
            }
        }
        let expected = favorable / (members.len() * nonmembers.len()) as f64;
        let auc = RocCurve::from_scores(&scores).unwrap().auc();
        assert!(
            (auc - expected).abs() <= 1e-9,
            "case {case}: auc {auc} vs pairwise oracle {expected}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "auc oracle took {elapsed:?}");
    pass(
        "auc-pairwise-oracle",
        format!("200 score sets within 1e-9 in {elapsed:?}"),
    );
}

#[test]
fn mink_at_full_coverage_reduces_to_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11_CE02);
    for case in 0..1000 {
        let len = rng.gen_range(1..=512);
        let values: Vec<f64> = (0..len).map(|_| -rng.gen_range(0.0..12.0f64)).collect();
        let tokens: Vec<String> = (0..len).map(|i| format!("t{i}")).collect();
        let record =
            TokenLogLikelihoods::new("x".to_string(), Variant::Original, tokens, values).unwrap();
        let loss = loss_score(&record).unwrap().score;
        let mink = mink_score(&record, 100.0).unwrap().score;
        assert!(
            (mink - loss).abs() <= 1e-12,
            "case {case}: mink(100) {mink} vs loss {loss}"
        );
    }
    pass(
        "mink-full-coverage-identity",
        "1000 vectors, |mink(100) - loss| <= 1e-12",
    );
}

#[test]
fn synthetic_pipeline_separates_members_and_collapses_under_shuffling() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11_CE03);
    let rows: Vec<(String, String, u8)> = (0..200)
        .map(|i| (format!("s{i:03}"), random_text(&mut rng, 24), (i % 2) as u8))
        .collect();
    let dataset = dir.path().join("data.jsonl");
    write_dataset(&dataset, &rows);

    let out = dir.path().join("out");
    let cache = dir.path().join("cache.jsonl");
    assert_success(&run(&[
        "generate",
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--cache",
        cache.to_str().unwrap(),
        "--backend-url",
        "mock",
        "--samples",
        "10",
        "--seed",
        "3",
        "--jobs",
        "4",
    ]));
    assert_success(&run(&[
        "score",
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--cache",
        cache.to_str().unwrap(),
        "--samples",
        "10",
        "--methods",
        "samia",
        "--seed",
        "3",
    ]));
    assert_success(&run(&[
        "evaluate",
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--methods",
        "samia",
        "--samples",
        "10",
        "--seed",
        "3",
    ]));

    let report = report_json(&out.join("report.json"));
    let samia = method_summary(&report, "samia");
    let auc = samia["macro_auc"].as_f64().unwrap();
    let tpr = samia["macro_tpr_at_budget"].as_f64().unwrap();
    assert!(auc >= 0.95, "separable corpus AUC {auc} below 0.95");
    assert!(tpr >= 0.90, "separable corpus TPR@10%FPR {tpr} below 0.90");

    // Permuting labels after generation severs scores from membership;
    // the same scores file must then carry no signal.
    let mut labels: Vec<u8> = rows.iter().map(|(_, _, label)| *label).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(41));
    let shuffled_rows: Vec<(String, String, u8)> = rows
        .iter()
        .zip(&labels)
        .map(|((id, text, _), label)| (id.clone(), text.clone(), *label))
        .collect();
    let shuffled = dir.path().join("shuffled.jsonl");
    write_dataset(&shuffled, &shuffled_rows);
    let out_shuffled = dir.path().join("out_shuffled");
    assert_success(&run(&[
        "evaluate",
        "--dataset",
        shuffled.to_str().unwrap(),
        "--out",
        out_shuffled.to_str().unwrap(),
        "--scores",
        out.join("scores.csv").to_str().unwrap(),
        "--methods",
        "samia",
        "--samples",
        "10",
        "--seed",
        "3",
    ]));
    let shuffled_report = report_json(&out_shuffled.join("report.json"));
    let shuffled_auc = method_summary(&shuffled_report, "samia")["macro_auc"]
        .as_f64()
        .unwrap();
    assert!(
        (shuffled_auc - 0.5).abs() <= 0.05,
        "shuffled-label AUC {shuffled_auc} outside 0.5 +/- 0.05"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "pipeline took {elapsed:?}");
    pass(
        "synthetic-separability",
        format!("auc {auc:.4}, tpr@10%fpr {tpr:.4}, shuffled auc {shuffled_auc:.4}, {elapsed:?}"),
    );
}

#[test]
fn mean_overlap_score_decreases_strictly_with_corruption() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11_CE04);
    let rows: Vec<(String, String, u8)> = (0..500)
        .map(|i| (format!("c{i:03}"), random_text(&mut rng, 18), 1))
        .collect();
    let dataset = dir.path().join("data.jsonl");
    write_dataset(&dataset, &rows);

    let mut means = Vec::new();
    for rate in ["0.0", "0.25", "0.5", "0.75"] {
        let tag = rate.replace('.', "_");
        let out = dir.path().join(format!("out_{tag}"));
        let cache = dir.path().join(format!("cache_{tag}.jsonl"));
        assert_success(&run(&[
            "generate",
            "--dataset",
            dataset.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--cache",
            cache.to_str().unwrap(),
            "--backend-url",
            "mock",
            "--mock-member-rate",
            rate,
            "--samples",
            "4",
            "--seed",
            "5",
            "--jobs",
            "4",
        ]));
        assert_success(&run(&[
            "score",
            "--dataset",
            dataset.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--cache",
            cache.to_str().unwrap(),
            "--samples",
            "4",
            "--methods",
            "samia",
        ]));
        let scores = csv_scores(&out.join("scores.csv"));
        assert_eq!(scores.len(), 500);
        let mean = scores.iter().map(|(_, _, s)| s).sum::<f64>() / scores.len() as f64;
        let design = 1.0 - rate.parse::<f64>().unwrap();
        assert!(
            (mean - design).abs() < 0.02,
            "rate {rate}: mean {mean} far from design value {design}"
        );
        means.push(mean);
    }
    for window in means.windows(2) {
        assert!(
            window[0] > window[1],
            "means not strictly decreasing: {means:?}"
        );
    }
    pass(
        "corruption-monotonicity",
        format!("means {means:?} strictly decreasing over rates 0, 0.25, 0.5, 0.75"),
    );
}

#[test]
fn more_samples_do_not_hurt_auc() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11_CE05);
    // Overlapping corruption rates make single-sample scores noisy, so
    // averaging over more samples has room to help.
    let rows: Vec<(String, String, u8)> = (0..240)
        .map(|i| (format!("n{i:03}"), random_text(&mut rng, 20), (i % 2) as u8))
        .collect();
    let dataset = dir.path().join("data.jsonl");
    write_dataset(&dataset, &rows);
    let out = dir.path().join("out");
    let cache = dir.path().join("cache.jsonl");
    assert_success(&run(&[
        "generate",
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--cache",
        cache.to_str().unwrap(),
        "--backend-url",
        "mock",
        "--mock-member-rate",
        "0.5",
        "--mock-nonmember-rate",
        "0.75",
        "--samples",
        "10",
        "--seed",
        "7",
        "--jobs",
        "4",
    ]));
    assert_success(&run(&[
        "sweep",
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--cache",
        cache.to_str().unwrap(),
        "--methods",
        "samia",
        "--axis",
        "m",
        "--values",
        "1,10",
        "--seed",
        "7",
    ]));
    let auc_at = |label: &str| {
        let report = report_json(&out.join(format!("report_{label}.json")));
        method_summary(&report, "samia")["macro_auc"]
            .as_f64()
            .unwrap()
    };
    let auc_1 = auc_at("m_1");
    let auc_10 = auc_at("m_10");
    assert!(
        auc_10 >= auc_1,
        "auc at m=10 ({auc_10}) below auc at m=1 ({auc_1})"
    );
    assert!(auc_10 > 0.5, "m=10 auc {auc_10} shows no signal at all");
    pass(
        "sample-count-trend",
        format!("auc m=1 {auc_1:.4} <= auc m=10 {auc_10:.4}"),
    );
}

#[test]
fn dataset_statistics_match_published_group_counts() {
    let dir = TempDir::new().unwrap();
    let dataset = dir.path().join("wikimia_layout.jsonl");
    let mut lines = String::new();
    for (group, members, nonmembers) in [
        (32, 387, 389),
        (64, 284, 258),
        (128, 139, 11),
        (256, 51, 31),
    ] {
        for i in 0..members + nonmembers {
            let label = u8::from(i < members);
            lines.push_str(
                &serde_json::json!({
                    "id": format!("g{group}_{i}"),
                    "text": "event page excerpt",
                    "label": label,
                    "length": group,
                })
                .to_string(),
            );
            lines.push('\n');
        }
    }
    fs::write(&dataset, lines).unwrap();

    let out = dir.path().join("out");
    let output = run(&[
        "stats",
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--check-published",
    ]);
    assert_success(&output);
    let stats: Value =
        serde_json::from_str(&fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();

    for (group, members, nonmembers, total) in [
        ("32", 387, 389, 776),
        ("64", 284, 258, 542),
        ("256", 51, 31, 82),
    ] {
        let counts = &stats["stats"]["groups"][group];
        assert_eq!(counts["members"], members);
        assert_eq!(counts["nonmembers"], nonmembers);
        assert_eq!(counts["total"], total);
    }
    let checks = stats["published_check"].as_array().unwrap();
    for group in [32, 64, 256] {
        let check = checks.iter().find(|c| c["group"] == group).unwrap();
        assert_eq!(check["matches"], true, "group {group} counts diverge");
    }
    let flagged = checks.iter().find(|c| c["group"] == 128).unwrap();
    assert!(
        flagged["matches"].is_null(),
        "group 128 must not be asserted"
    );
    assert!(flagged["note"].as_str().unwrap().contains("inconsistent"));
    assert!(String::from_utf8_lossy(&output.stderr).contains("group 128"));
    pass(
        "published-count-check",
        "groups 32/64/256 asserted, group 128 flagged not asserted",
    );
}

/// Splits exactly like the pipeline: floor(ratio * words) clamped to keep
/// both sides non-empty.
fn split_words(text: &str, ratio: f64) -> (String, Vec<String>) {
    let words: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    let cut = ((ratio * words.len() as f64) as usize).clamp(1, words.len() - 1);
    (words[..cut].join(" "), words[cut..].to_vec())
}

#[test]
fn externally_produced_artifacts_flow_through_to_the_report() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11_CE06);
    let mut rows = Vec::new();
    for i in 0..24 {
        let words = if i < 12 { 32 } else { 64 };
        rows.push((
            format!("e{i:02}"),
            random_text(&mut rng, words),
            (i % 2) as u8,
        ));
    }
    let dataset = dir.path().join("data.jsonl");
    write_dataset(&dataset, &rows);

    // The cache and log-likelihood files are written as raw JSONL, the way
    // a separate GPU-side toolchain would leave them.
    let mut cache_lines = String::new();
    let mut ll_lines = String::new();
    for (id, text, label) in &rows {
        let member = *label == 1;
        let (prompt, reference) = split_words(text, 0.5);
        let corruption = if member { 0.15 } else { 0.85 };
        let completions: Vec<String> = (0..4)
            .map(|j| {
                reference
                    .iter()
                    .enumerate()
                    .map(|(w, word)| {
                        if rng.gen_bool(corruption) {
                            format!("xq{j}z{w}")
                        } else {
                            word.clone()
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        cache_lines.push_str(
            &serde_json::json!({
                "target_id": id,
                "request": {
                    "prompt": prompt,
                    "num_samples": 4,
                    "temperature": 1.0,
                    "max_length": 1024,
                    "top_k": 50,
                    "top_p": 1.0,
                },
                "completions": completions,
                "timestamp": "2024-03-01T00:00:00Z",
                "backend": "http",
            })
            .to_string(),
        );
        cache_lines.push('\n');

        let token_count = text.split_whitespace().count();
        let tokens: Vec<String> = (0..token_count).map(|t| format!("w{t}")).collect();
        let original: Vec<f64> = (0..token_count)
            .map(|_| {
                if member {
                    -rng.gen_range(0.5..1.5)
                } else {
                    -rng.gen_range(3.0..5.0)
                }
            })
            .collect();
        let shift = if member { -0.8 } else { 0.2 };
        let lowered: Vec<f64> = original.iter().map(|v| v + shift).collect();
        for (variant, values) in [("original", &original), ("lowercase", &lowered)] {
            ll_lines.push_str(
                &serde_json::json!({
                    "id": id,
                    "variant": variant,
                    "tokens": tokens,
                    "loglikes": values,
                })
                .to_string(),
            );
            ll_lines.push('\n');
        }
    }
    let cache = dir.path().join("external_cache.jsonl");
    let loglikes = dir.path().join("external_loglikes.jsonl");
    fs::write(&cache, cache_lines).unwrap();
    fs::write(&loglikes, ll_lines).unwrap();

    let out = dir.path().join("out");
    assert_success(&run(&[
        "score",
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--cache",
        cache.to_str().unwrap(),
        "--loglikes",
        loglikes.to_str().unwrap(),
        "--methods",
        "all",
        "--samples",
        "4",
    ]));
    assert_success(&run(&[
        "evaluate",
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--methods",
        "all",
        "--samples",
        "4",
    ]));

    let expected_methods = [
        "samia",
        "samia_zlib",
        "loss",
        "lowercase",
        "ppl_zlib",
        "mink",
    ];

    // Scores come out method-major in canonical order, instances in
    // dataset order within each method.
    let scores = csv_scores(&out.join("scores.csv"));
    assert_eq!(scores.len(), expected_methods.len() * rows.len());
    let method_order: Vec<&str> = scores
        .iter()
        .map(|(_, method, _)| method.as_str())
        .collect::<Vec<_>>()
        .chunks(rows.len())
        .map(|chunk| {
            assert!(chunk.iter().all(|m| *m == chunk[0]));
            chunk[0]
        })
        .collect();
    assert_eq!(method_order, expected_methods);

    let report = report_json(&out.join("report.json"));
    assert_eq!(report["methods"].as_array().unwrap().len(), 6);
    for method in expected_methods {
        let summary = method_summary(&report, method);
        let groups = summary["groups"].as_array().unwrap();
        let names: Vec<&str> = groups
            .iter()
            .map(|g| g["group"].as_str().unwrap())
            .collect();
        assert_eq!(names, ["32", "64"], "{method} group rows");
        assert!(summary["macro_auc"].is_f64());
        assert!(summary["macro_tpr_at_budget"].is_f64());
        // The artifacts were constructed with real signal; every method
        // should score members above chance.
        let auc = summary["macro_auc"].as_f64().unwrap();
        assert!(auc > 0.5, "{method} auc {auc} shows no signal");
    }

    let table = fs::read_to_string(out.join("report.txt")).unwrap();
    for column in ["method", "group", "auc", "tpr@fpr", "threshold"] {
        assert!(table.contains(column), "report table lacks column {column}");
    }
    for method in expected_methods {
        assert!(
            table
                .lines()
                .any(|l| l.starts_with(method) && l.contains("macro")),
            "report table lacks a macro row for {method}"
        );
    }
    pass(
        "external-artifact-ingestion",
        "6 methods x 2 groups + macro reported from externally written cache and loglikes",
    );
}

#[test]
fn rerunning_the_pipeline_reproduces_artifacts_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11_CE07);
    let rows: Vec<(String, String, u8)> = (0..60)
        .map(|i| (format!("d{i:02}"), random_text(&mut rng, 16), (i % 2) as u8))
        .collect();
    let dataset = dir.path().join("data.jsonl");
    write_dataset(&dataset, &rows);

    let run_pipeline = |tag: &str, jobs: &str| {
        let out = dir.path().join(format!("out_{tag}"));
        let cache = dir.path().join(format!("cache_{tag}.jsonl"));
        assert_success(&run(&[
            "generate",
            "--dataset",
            dataset.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--cache",
            cache.to_str().unwrap(),
            "--backend-url",
            "mock",
            "--samples",
            "5",
            "--seed",
            "13",
            "--jobs",
            jobs,
        ]));
        assert_success(&run(&[
            "score",
            "--dataset",
            dataset.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--cache",
            cache.to_str().unwrap(),
            "--samples",
            "5",
            "--methods",
            "samia,samia_zlib",
            "--seed",
            "13",
            "--jobs",
            jobs,
        ]));
        assert_success(&run(&[
            "evaluate",
            "--dataset",
            dataset.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--methods",
            "samia,samia_zlib",
            "--samples",
            "5",
            "--seed",
            "13",
        ]));
        out
    };

    let first = run_pipeline("a", "4");
    let second = run_pipeline("b", "1");
    let scores_a = fs::read(first.join("scores.csv")).unwrap();
    let scores_b = fs::read(second.join("scores.csv")).unwrap();
    assert_eq!(scores_a, scores_b, "scores.csv differs between reruns");
    let report_a = fs::read(first.join("report.json")).unwrap();
    let report_b = fs::read(second.join("report.json")).unwrap();
    assert_eq!(report_a, report_b, "report.json differs between reruns");
    pass(
        "byte-identical-reruns",
        format!(
            "scores.csv ({} bytes) and report.json ({} bytes) identical across fresh runs",
            scores_a.len(),
            report_a.len()
        ),
    );
}
