//! Temporal knowledge graph data model: quadruples, vocabularies, snapshot
//! construction with extrapolation splits, and incremental frequency
//! bookkeeping.

mod quad;
mod snapshot;
mod tracker;
mod tsv;

pub use quad::{with_inverses, EntityId, Quadruple, RelationId, Time, Vocabulary};
pub use snapshot::{build_snapshots, split_snapshot, Snapshot, SnapshotConfig, TaskSplit};
pub use tracker::{unseen_entities, FrequencyTracker};
pub use tsv::{
    load_bundle, parse_quadruple_file, parse_quadruple_reader, write_bundle, Bundle, BundleMeta,
    SnapshotMeta,
};
