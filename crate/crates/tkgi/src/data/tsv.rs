//! TSV ingestion and snapshot-bundle files.
//!
//! Input format: one quad per line, `subject<TAB>relation<TAB>object<TAB>date`,
//! UTF-8, extra tab-separated fields ignored. The date is either an ISO
//! `YYYY-MM-DD` calendar date or a plain integer day number; either way,
//! ingestion shifts times so the earliest becomes day 0.
//!
//! A snapshot bundle is a directory of `snapshot_<t>/{train,valid,test}.tsv`
//! in the same format (day indexes as the date column) plus a `meta.json`
//! with counts, intervals, and vocabulary sizes.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::data::{Quadruple, Snapshot, SnapshotConfig, TaskSplit, Time, Vocabulary};
use crate::error::{Error, Result};

fn parse_day(field: &str, path: &Path, line: usize) -> Result<i64> {
    if let Ok(day) = field.parse::<i64>() {
        if day < 0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("negative day number {day}"),
            });
        }
        return Ok(day);
    }
    match NaiveDate::parse_from_str(field, "%Y-%m-%d") {
        Ok(date) => Ok(i64::from(date.num_days_from_ce())),
        Err(_) => Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("cannot parse date {field:?} (expected YYYY-MM-DD or integer)"),
        }),
    }
}

fn parse_lines<R: BufRead>(
    reader: R,
    path: &Path,
    entities: &mut Vocabulary,
    relations: &mut Vocabulary,
) -> Result<Vec<Quadruple>> {
    let mut quads = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!(
                    "expected at least 4 tab-separated fields, found {}",
                    fields.len()
                ),
            });
        }
        let day = parse_day(fields[3], path, line_no)?;
        quads.push(Quadruple {
            subject: entities.intern(fields[0]),
            relation: relations.intern(fields[1]),
            object: entities.intern(fields[2]),
            time: day,
        });
    }
    Ok(quads)
}

/// Parse a raw quad file, extending the vocabularies in first-seen order.
///
/// Returns quads sorted by time ascending (stable, so same-day quads keep
/// file order) with times shifted so the earliest date is day 0.
pub fn parse_quadruple_file(
    path: impl AsRef<Path>,
    entities: &mut Vocabulary,
    relations: &mut Vocabulary,
) -> Result<Vec<Quadruple>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_quadruple_reader(BufReader::new(file), path, entities, relations)
}

/// [`parse_quadruple_file`] over any reader; `origin` is used in errors.
pub fn parse_quadruple_reader<R: BufRead>(
    reader: R,
    origin: &Path,
    entities: &mut Vocabulary,
    relations: &mut Vocabulary,
) -> Result<Vec<Quadruple>> {
    let mut quads = parse_lines(reader, origin, entities, relations)?;
    if quads.is_empty() {
        return Err(Error::Data(format!("{}: no quadruples", origin.display())));
    }
    let min_day = quads.iter().map(|q| q.time).min().unwrap();
    for q in &mut quads {
        q.time -= min_day;
    }
    quads.sort_by_key(|q| q.time);
    Ok(quads)
}

/// Per-snapshot counts and interval, as stored in `meta.json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SnapshotMeta {
    pub index: usize,
    pub interval: (Time, Time),
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

/// Bundle-level metadata, written as `meta.json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BundleMeta {
    pub num_entities: usize,
    pub num_relations: usize,
    pub num_snapshots: usize,
    /// Global half-open time range covered by the snapshots.
    pub time_range: (Time, Time),
    pub config: SnapshotConfig,
    pub snapshots: Vec<SnapshotMeta>,
}

/// A loaded snapshot bundle: per-task splits plus shared vocabularies.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub meta: BundleMeta,
    pub entities: Vocabulary,
    pub relations: Vocabulary,
    pub tasks: Vec<TaskSplit>,
}

impl Bundle {
    /// Reassemble the snapshot sequence (each task's quads in time order).
    pub fn snapshots(&self) -> Vec<Snapshot> {
        self.tasks
            .iter()
            .zip(&self.meta.snapshots)
            .map(|(task, meta)| Snapshot {
                index: meta.index,
                quads: task.all(),
                interval: meta.interval,
            })
            .collect()
    }
}

fn snapshot_dir(root: &Path, index: usize) -> PathBuf {
    root.join(format!("snapshot_{index}"))
}

fn write_split(path: &Path, quads: &[Quadruple], ents: &Vocabulary, rels: &Vocabulary) -> Result<()> {
    let mut out = String::new();
    for q in quads {
        out.push_str(ents.label(q.subject)?);
        out.push('\t');
        out.push_str(rels.label(q.relation)?);
        out.push('\t');
        out.push_str(ents.label(q.object)?);
        out.push('\t');
        out.push_str(&q.time.to_string());
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Write a snapshot bundle directory. `splits[i]` must be the split of
/// `snapshots[i]`. Returns the metadata that was written to `meta.json`.
pub fn write_bundle(
    dir: impl AsRef<Path>,
    snapshots: &[Snapshot],
    splits: &[TaskSplit],
    entities: &Vocabulary,
    relations: &Vocabulary,
    config: &SnapshotConfig,
) -> Result<BundleMeta> {
    let dir = dir.as_ref();
    if snapshots.len() != splits.len() || snapshots.is_empty() {
        return Err(Error::Data(format!(
            "bundle needs matching non-empty snapshot/split lists, got {}/{}",
            snapshots.len(),
            splits.len()
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut metas = Vec::with_capacity(snapshots.len());
    for (snapshot, split) in snapshots.iter().zip(splits) {
        let sdir = snapshot_dir(dir, snapshot.index);
        fs::create_dir_all(&sdir).map_err(|e| Error::io(&sdir, e))?;
        write_split(&sdir.join("train.tsv"), &split.train, entities, relations)?;
        write_split(&sdir.join("valid.tsv"), &split.valid, entities, relations)?;
        write_split(&sdir.join("test.tsv"), &split.test, entities, relations)?;
        metas.push(SnapshotMeta {
            index: snapshot.index,
            interval: snapshot.interval,
            train: split.train.len(),
            valid: split.valid.len(),
            test: split.test.len(),
        });
    }

    let meta = BundleMeta {
        num_entities: entities.len(),
        num_relations: relations.len(),
        num_snapshots: snapshots.len(),
        time_range: (
            snapshots.first().unwrap().interval.0,
            snapshots.last().unwrap().interval.1,
        ),
        config: config.clone(),
        snapshots: metas,
    };
    let meta_path = dir.join("meta.json");
    let json = serde_json::to_string_pretty(&meta)?;
    fs::write(&meta_path, json.as_bytes()).map_err(|e| Error::io(&meta_path, e))?;
    Ok(meta)
}

fn read_split(
    path: &Path,
    entities: &mut Vocabulary,
    relations: &mut Vocabulary,
) -> Result<Vec<Quadruple>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    // Bundle files carry already-normalized day indexes; no re-shifting, or
    // each split would collapse back to day 0.
    let quads = parse_lines(BufReader::new(file), path, entities, relations)?;
    if quads.windows(2).any(|w| w[0].time > w[1].time) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "quads are not sorted by time".into(),
        });
    }
    Ok(quads)
}

/// Load a bundle directory written by [`write_bundle`]. Vocabularies are
/// interned in file order (snapshot 1 train first), so ids are dense and
/// identical across reloads of the same bundle.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<Bundle> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: BundleMeta = serde_json::from_str(&meta_text)?;

    let mut entities = Vocabulary::new();
    let mut relations = Vocabulary::new();
    let mut tasks = Vec::with_capacity(meta.num_snapshots);
    for sm in &meta.snapshots {
        let sdir = snapshot_dir(dir, sm.index);
        let split = TaskSplit {
            train: read_split(&sdir.join("train.tsv"), &mut entities, &mut relations)?,
            valid: read_split(&sdir.join("valid.tsv"), &mut entities, &mut relations)?,
            test: read_split(&sdir.join("test.tsv"), &mut entities, &mut relations)?,
        };
        if split.train.len() != sm.train || split.valid.len() != sm.valid || split.test.len() != sm.test
        {
            return Err(Error::Format {
                path: sdir,
                message: format!(
                    "split sizes {}/{}/{} disagree with meta.json {}/{}/{}",
                    split.train.len(),
                    split.valid.len(),
                    split.test.len(),
                    sm.train,
                    sm.valid,
                    sm.test
                ),
            });
        }
        tasks.push(split);
    }
    if entities.len() != meta.num_entities || relations.len() != meta.num_relations {
        return Err(Error::Format {
            path: meta_path,
            message: format!(
                "vocabulary sizes {}/{} disagree with meta.json {}/{}",
                entities.len(),
                relations.len(),
                meta.num_entities,
                meta.num_relations
            ),
        });
    }
    Ok(Bundle {
        meta,
        entities,
        relations,
        tasks,
    })
}
