//! File emission. Every output is written atomically (temp file in the
//! destination directory, then rename) and deterministically: fixed column
//! orders, shortest-round-trip float formatting, sorted metadata.

use std::io::Write;
use std::path::{Path, PathBuf};

use samia_core::attacks::{AttackScore, Method};
use samia_core::evaluation::RocReport;
use serde::Deserialize;

use crate::errors::Failure;

/// Writes `bytes` to `path` atomically, creating parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io_err = |e: std::io::Error| Failure::data(format!("{}: {e}", path.display()));
    std::fs::create_dir_all(&parent).map_err(io_err)?;
    let mut temp = tempfile::NamedTempFile::new_in(&parent).map_err(io_err)?;
    temp.write_all(bytes).map_err(io_err)?;
    temp.flush().map_err(io_err)?;
    temp.persist(path)
        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Scores CSV: header `id,method,score,params`, one row per scored
/// (instance, method) pair, in scoring order.
pub fn write_scores_csv(path: &Path, rows: &[AttackScore]) -> Result<(), Failure> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    write_atomic(path, &bytes)
}

#[derive(Debug, Deserialize)]
struct RawScoreRow {
    id: String,
    method: String,
    score: f64,
    #[serde(default)]
    params: String,
}

/// One parsed row of a scores CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub id: String,
    pub method: Method,
    pub score: f64,
    pub params: String,
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRow>, Failure> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (idx, result) in reader.deserialize::<RawScoreRow>().enumerate() {
        let raw = result
            .map_err(|e| Failure::data(format!("{}: row {}: {e}", path.display(), idx + 1)))?;
        let method: Method = raw
            .method
            .parse()
            .map_err(|e| Failure::data(format!("{}: row {}: {e}", path.display(), idx + 1)))?;
        rows.push(ScoreRow {
            id: raw.id,
            method,
            score: raw.score,
            params: raw.params,
        });
    }
    Ok(rows)
}

/// Report JSON (pretty, trailing newline) plus the aligned text rendering.
pub fn write_report(
    out_dir: &Path,
    stem: &str,
    report: &RocReport,
) -> Result<(PathBuf, PathBuf), Failure> {
    let json_path = out_dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(report).expect("report serialization is infallible");
    write_atomic(&json_path, format!("{json}\n").as_bytes())?;
    let text_path = out_dir.join(format!("{stem}.txt"));
    write_atomic(&text_path, report.to_string().as_bytes())?;
    Ok((json_path, text_path))
}

/// ROC points of every (method, group) curve:
/// `method,group,threshold,fpr,tpr`. The leading point of each curve has an
/// infinite threshold, written as `inf`.
pub fn write_roc_csv(
    path: &Path,
    curves: &[(Method, String, samia_core::evaluation::RocCurve)],
) -> Result<(), Failure> {
    let mut out = String::from("method,group,threshold,fpr,tpr\n");
    for (method, group, curve) in curves {
        for point in curve.points() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                method.id(),
                group,
                point.threshold,
                point.fpr,
                point.tpr
            ));
        }
    }
    write_atomic(path, out.as_bytes())
}

pub const HISTOGRAM_BINS: usize = 20;

/// Per-class score histograms, one method at a time:
/// `method,bin_low,bin_high,members,nonmembers`. Bins split `[min, max]`
/// evenly; the final bin includes the maximum. Constant scores produce a
/// single degenerate bin.
pub fn write_histogram_csv(
    path: &Path,
    per_method: &[(Method, Vec<(f64, bool)>)],
) -> Result<(), Failure> {
    let mut out = String::from("method,bin_low,bin_high,members,nonmembers\n");
    for (method, scores) in per_method {
        if scores.is_empty() {
            continue;
        }
        let min = scores.iter().map(|(s, _)| *s).fold(f64::INFINITY, f64::min);
        let max = scores
            .iter()
            .map(|(s, _)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        let width = (max - min) / HISTOGRAM_BINS as f64;
        let bins = if width > 0.0 { HISTOGRAM_BINS } else { 1 };
        let mut counts = vec![(0usize, 0usize); bins];
        for &(score, label) in scores {
            let idx = if width > 0.0 {
                (((score - min) / width) as usize).min(bins - 1)
            } else {
                0
            };
            if label {
                counts[idx].0 += 1;
            } else {
                counts[idx].1 += 1;
            }
        }
        for (idx, (members, nonmembers)) in counts.iter().enumerate() {
            let low = min + width * idx as f64;
            let high = if idx + 1 == bins {
                max
            } else {
                min + width * (idx + 1) as f64
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                method.id(),
                low,
                high,
                members,
                nonmembers
            ));
        }
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let rows = vec![
            AttackScore {
                target_id: "0".to_string(),
                method: Method::Samia,
                score: 0.8125,
                params: "m=10;n=1;casing=lowercase".to_string(),
            },
            AttackScore {
                target_id: "1".to_string(),
                method: Method::Loss,
                score: -2.5,
                params: String::new(),
            },
        ];
        write_scores_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("id,method,score,params\n"), "{text}");
        let back = read_scores_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].id, "0");
        assert_eq!(back[0].method, Method::Samia);
        assert_eq!(back[0].score, 0.8125);
        assert_eq!(back[1].params, "");
    }

    #[test]
    fn read_rejects_unknown_methods() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        std::fs::write(&path, "id,method,score,params\n0,bogus,1.0,\n").unwrap();
        let err = read_scores_csv(&path).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn atomic_write_replaces_existing_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("file.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
    }

    #[test]
    fn histogram_bins_cover_range_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hist.csv");
        let scores: Vec<(f64, bool)> = (0..40).map(|i| (i as f64 / 39.0, i % 2 == 0)).collect();
        write_histogram_csv(&path, &[(Method::Samia, scores)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), HISTOGRAM_BINS);
        let total: usize = rows
            .iter()
            .map(|row| {
                let cols: Vec<&str> = row.split(',').collect();
                cols[3].parse::<usize>().unwrap() + cols[4].parse::<usize>().unwrap()
            })
            .sum();
        assert_eq!(total, 40);
        // degenerate range collapses to one bin
        write_histogram_csv(&path, &[(Method::Loss, vec![(1.0, true), (1.0, false)])]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
    }
}
