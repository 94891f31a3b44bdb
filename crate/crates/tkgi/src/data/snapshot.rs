//! Snapshot construction and extrapolation splits.
//!
//! A corpus is partitioned on distinct-timestamp boundaries: the initial
//! snapshot takes the first `initial_fraction` of distinct days, and the
//! remainder is segmented into consecutive windows of `window_days` distinct
//! days each (the last window may be shorter). Each snapshot is then split
//! into train/valid/test ranges that never share a timestamp, so training
//! data is always strictly earlier than validation data, which is strictly
//! earlier than test data.

use serde::{Deserialize, Serialize};

use crate::data::{Quadruple, Time};
use crate::error::{Error, Result};

/// How to partition a corpus into snapshots and each snapshot into splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnapshotConfig {
    /// Fraction of distinct timestamps in the initial snapshot, in (0, 1).
    pub initial_fraction: f64,
    /// Distinct days per subsequent snapshot window.
    pub window_days: usize,
    /// Train/valid/test fractions of each snapshot's distinct days.
    pub split_fractions: (f64, f64, f64),
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        Self {
            initial_fraction: 0.5,
            window_days: 7,
            split_fractions: (0.8, 0.1, 0.1),
        }
    }
}

impl SnapshotConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_fraction > 0.0 && self.initial_fraction < 1.0) {
            return Err(Error::Config(format!(
                "initial_fraction must be in (0, 1), got {}",
                self.initial_fraction
            )));
        }
        if self.window_days == 0 {
            return Err(Error::Config("window_days must be >= 1".into()));
        }
        let (a, b, c) = self.split_fractions;
        if a <= 0.0 || b <= 0.0 || c <= 0.0 {
            return Err(Error::Config(format!(
                "split fractions must all be positive (valid/test must be non-empty), got ({a}, {b}, {c})"
            )));
        }
        if ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {}",
                a + b + c
            )));
        }
        Ok(())
    }
}

/// The quadruples of one half-open time interval `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// 1-based position in the sequence.
    pub index: usize,
    pub quads: Vec<Quadruple>,
    /// Half-open interval covering every quad's time.
    pub interval: (Time, Time),
}

/// A snapshot's quads divided into extrapolation splits: every train time is
/// strictly before every valid time, and every valid time strictly before
/// every test time.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplit {
    pub train: Vec<Quadruple>,
    pub valid: Vec<Quadruple>,
    pub test: Vec<Quadruple>,
}

impl TaskSplit {
    /// All quads of the underlying snapshot, in time order.
    pub fn all(&self) -> Vec<Quadruple> {
        let mut out = Vec::with_capacity(self.train.len() + self.valid.len() + self.test.len());
        out.extend_from_slice(&self.train);
        out.extend_from_slice(&self.valid);
        out.extend_from_slice(&self.test);
        out
    }
}

fn distinct_times(quads: &[Quadruple]) -> Vec<Time> {
    let mut days: Vec<Time> = Vec::new();
    for q in quads {
        if days.last() != Some(&q.time) {
            days.push(q.time);
        }
    }
    days
}

fn ensure_sorted(quads: &[Quadruple]) -> Result<()> {
    if quads.windows(2).any(|w| w[0].time > w[1].time) {
        return Err(Error::Data("quadruples must be sorted by time".into()));
    }
    Ok(())
}

/// Partition a time-sorted corpus into snapshots.
///
/// The initial snapshot covers the first `ceil(initial_fraction * D)` of the
/// `D` distinct timestamps; the rest is segmented into consecutive windows
/// of `window_days` distinct timestamps. Intervals chain exactly, so the
/// snapshots partition `[first_time, last_time + 1)` with no gap or overlap
/// and every quad lands in exactly one snapshot.
pub fn build_snapshots(quads: &[Quadruple], cfg: &SnapshotConfig) -> Result<Vec<Snapshot>> {
    cfg.validate()?;
    ensure_sorted(quads)?;
    let days = distinct_times(quads);
    if days.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 distinct timestamps to form snapshots, got {}",
            days.len()
        )));
    }
    let initial_days = (cfg.initial_fraction * days.len() as f64).ceil() as usize;
    if initial_days >= days.len() {
        return Err(Error::Data(format!(
            "initial snapshot would consume all {} distinct timestamps; \
             too few to form at least 2 snapshots",
            days.len()
        )));
    }

    // Day-index boundaries of each snapshot: [0, initial_days), then windows.
    let mut bounds = vec![0usize, initial_days];
    let mut next = initial_days + cfg.window_days;
    while next < days.len() {
        bounds.push(next);
        next += cfg.window_days;
    }
    bounds.push(days.len());

    let mut snapshots = Vec::with_capacity(bounds.len() - 1);
    let mut cursor = 0usize;
    for (t, pair) in bounds.windows(2).enumerate() {
        let (day_lo, day_hi) = (pair[0], pair[1]);
        let start = days[day_lo];
        let end = if day_hi == days.len() {
            days[days.len() - 1] + 1
        } else {
            days[day_hi]
        };
        let mut snapshot_quads = Vec::new();
        while cursor < quads.len() && quads[cursor].time < end {
            snapshot_quads.push(quads[cursor]);
            cursor += 1;
        }
        snapshots.push(Snapshot {
            index: t + 1,
            quads: snapshot_quads,
            interval: (start, end),
        });
    }
    debug_assert_eq!(cursor, quads.len());
    Ok(snapshots)
}

/// Divide one snapshot's quads into train/valid/test on distinct-timestamp
/// boundaries (a timestamp never straddles two splits). Fractions apply to
/// the count of distinct timestamps, with boundaries clamped so that every
/// split holds at least one timestamp.
pub fn split_snapshot(snapshot: &Snapshot, fractions: (f64, f64, f64)) -> Result<TaskSplit> {
    let (ftr, fv, fte) = fractions;
    if ftr <= 0.0 || fv <= 0.0 || fte <= 0.0 {
        return Err(Error::Config(format!(
            "split fractions must all be positive (valid/test must be non-empty), got ({ftr}, {fv}, {fte})"
        )));
    }
    if ((ftr + fv + fte) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must sum to 1, got {}",
            ftr + fv + fte
        )));
    }
    ensure_sorted(&snapshot.quads)?;
    let days = distinct_times(&snapshot.quads);
    let n = days.len();
    if n < 3 {
        return Err(Error::Data(format!(
            "snapshot {} has {} distinct timestamps; need at least 3 to form \
             non-overlapping train/valid/test ranges",
            snapshot.index, n
        )));
    }

    // The 1e-9 nudge keeps exact fractions like 0.8 * 10 from flooring low.
    let mut train_end = (ftr * n as f64 + 1e-9).floor() as usize;
    train_end = train_end.clamp(1, n - 2);
    let mut valid_end = ((ftr + fv) * n as f64 + 1e-9).floor() as usize;
    valid_end = valid_end.clamp(train_end + 1, n - 1);

    let valid_start_day = days[train_end];
    let test_start_day = days[valid_end];

    let mut split = TaskSplit {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
    };
    for q in &snapshot.quads {
        if q.time < valid_start_day {
            split.train.push(*q);
        } else if q.time < test_start_day {
            split.valid.push(*q);
        } else {
            split.test.push(*q);
        }
    }
    Ok(split)
}
