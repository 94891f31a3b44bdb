//! Report files: per-task `metrics.json`, long-format `curve.csv`, and
//! `buckets.csv`. All writers are deterministic — same report, same bytes —
//! and refuse to write empty reports.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::MetricReport;

/// One task's metrics under both ranking protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task: usize,
    /// Which checkpoint produced these numbers; always the eval checkpoint.
    pub checkpoint: String,
    pub raw: MetricReport,
    pub time_filtered: MetricReport,
}

pub fn write_task_metrics(path: impl AsRef<Path>, report: &TaskMetrics) -> Result<()> {
    let path = path.as_ref();
    if report.raw.per_set.is_empty() || report.time_filtered.per_set.is_empty() {
        return Err(Error::Data("refusing to write an empty metric report".into()));
    }
    let json = serde_json::to_string_pretty(report)?;
    fs::write(path, json.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn parse_task_metrics(path: impl AsRef<Path>) -> Result<TaskMetrics> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// One `curve.csv` row: `step,eval_set,metric,value,strategy,seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveCsvRow {
    pub step: usize,
    pub eval_set: String,
    pub metric: String,
    pub value: f64,
    pub strategy: String,
    pub seed: u64,
}

pub const CURVE_HEADER: &str = "step,eval_set,metric,value,strategy,seed";

pub fn write_curve_csv(path: impl AsRef<Path>, rows: &[CurveCsvRow]) -> Result<()> {
    let path = path.as_ref();
    if rows.is_empty() {
        return Err(Error::Data("refusing to write an empty curve.csv".into()));
    }
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step, r.eval_set, r.metric, r.value, r.strategy, r.seed
        ));
    }
    fs::write(path, out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn parse_curve_csv(path: impl AsRef<Path>) -> Result<Vec<CurveCsvRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != CURVE_HEADER {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("line {}: expected 6 fields", i + 1),
            });
        }
        rows.push(CurveCsvRow {
            step: f[0].parse().map_err(|_| bad_field(path, i, "step"))?,
            eval_set: f[1].to_string(),
            metric: f[2].to_string(),
            value: f[3].parse().map_err(|_| bad_field(path, i, "value"))?,
            strategy: f[4].to_string(),
            seed: f[5].parse().map_err(|_| bad_field(path, i, "seed"))?,
        });
    }
    Ok(rows)
}

/// One `buckets.csv` row: `bucket_lo,bucket_hi,metric,value,count,strategy,seed`.
/// The open-ended bucket writes `inf` for `bucket_hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketCsvRow {
    pub bucket_lo: u64,
    pub bucket_hi: Option<u64>,
    pub metric: String,
    pub value: f64,
    pub count: usize,
    pub strategy: String,
    pub seed: u64,
}

pub const BUCKETS_HEADER: &str = "bucket_lo,bucket_hi,metric,value,count,strategy,seed";

pub fn write_buckets_csv(path: impl AsRef<Path>, rows: &[BucketCsvRow]) -> Result<()> {
    let path = path.as_ref();
    if rows.is_empty() {
        return Err(Error::Data("refusing to write an empty buckets.csv".into()));
    }
    let mut out = String::from(BUCKETS_HEADER);
    out.push('\n');
    for r in rows {
        let hi = r
            .bucket_hi
            .map(|h| h.to_string())
            .unwrap_or_else(|| "inf".to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.bucket_lo, hi, r.metric, r.value, r.count, r.strategy, r.seed
        ));
    }
    fs::write(path, out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn parse_buckets_csv(path: impl AsRef<Path>) -> Result<Vec<BucketCsvRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != BUCKETS_HEADER {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("line {}: expected 7 fields", i + 1),
            });
        }
        let hi = if f[1] == "inf" {
            None
        } else {
            Some(f[1].parse().map_err(|_| bad_field(path, i, "bucket_hi"))?)
        };
        rows.push(BucketCsvRow {
            bucket_lo: f[0].parse().map_err(|_| bad_field(path, i, "bucket_lo"))?,
            bucket_hi: hi,
            metric: f[2].to_string(),
            value: f[3].parse().map_err(|_| bad_field(path, i, "value"))?,
            count: f[4].parse().map_err(|_| bad_field(path, i, "count"))?,
            strategy: f[5].to_string(),
            seed: f[6].parse().map_err(|_| bad_field(path, i, "seed"))?,
        });
    }
    Ok(rows)
}

fn bad_field(path: &Path, line_idx: usize, field: &str) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: format!("line {}: bad {field}", line_idx + 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Quadruple;
    use crate::eval::{metrics, RankResult};
    use std::collections::BTreeMap;

    fn rr(rank: usize) -> RankResult {
        RankResult {
            query: Quadruple::new(0, 0, 0, 0),
            rank,
            filtered: false,
        }
    }

    fn sample_report() -> TaskMetrics {
        let a = metrics(&[rr(1), rr(3)]).unwrap();
        let b = metrics(&[rr(2)]).unwrap();
        let report = MetricReport::from_test_sets(&[a, b], BTreeMap::new()).unwrap();
        TaskMetrics {
            task: 2,
            checkpoint: "eval".into(),
            raw: report.clone(),
            time_filtered: report,
        }
    }

    #[test]
    fn metrics_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.json");
        let report = sample_report();
        write_task_metrics(&path, &report).unwrap();
        let parsed = parse_task_metrics(&path).unwrap();
        assert_eq!(parsed, report);
        // Deterministic bytes.
        let path2 = dir.path().join("metrics2.json");
        write_task_metrics(&path2, &report).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn curve_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let rows = vec![
            CurveCsvRow {
                step: 1,
                eval_set: "test_1".into(),
                metric: "mrr".into(),
                value: 0.625,
                strategy: "finetune".into(),
                seed: 7,
            },
            CurveCsvRow {
                step: 2,
                eval_set: "average".into(),
                metric: "hit10".into(),
                value: 1.0,
                strategy: "finetune".into(),
                seed: 7,
            },
        ];
        write_curve_csv(&path, &rows).unwrap();
        assert_eq!(parse_curve_csv(&path).unwrap(), rows);
    }

    #[test]
    fn buckets_csv_round_trips_open_bucket() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("buckets.csv");
        let rows = vec![
            BucketCsvRow {
                bucket_lo: 0,
                bucket_hi: Some(18),
                metric: "hit1".into(),
                value: 0.25,
                count: 4,
                strategy: "ours-full".into(),
                seed: 1,
            },
            BucketCsvRow {
                bucket_lo: 48,
                bucket_hi: None,
                metric: "hit1".into(),
                value: 0.5,
                count: 2,
                strategy: "ours-full".into(),
                seed: 1,
            },
        ];
        write_buckets_csv(&path, &rows).unwrap();
        assert_eq!(parse_buckets_csv(&path).unwrap(), rows);
    }

    #[test]
    fn empty_reports_are_never_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        assert!(write_curve_csv(&path, &[]).is_err());
        assert!(!path.exists());
        assert!(write_buckets_csv(dir.path().join("b.csv"), &[]).is_err());
    }
}
