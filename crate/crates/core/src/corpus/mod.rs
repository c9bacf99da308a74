//! Tabular datasets, task manifests and train/valid/test splits.

pub mod manifest;
pub mod split;
pub mod table;

pub use manifest::{
    fill_template, placeholders, validate_manifest, FeatureType, LabelRange, ManifestError, MetricId, Role,
    SplitMethod, TaskKind, TaskManifest, Violation,
};
pub use split::{
    assign_splits, fit_label_range, resolve_label_range, split_sizes, write_split_audit, SplitError,
    SplitSpec,
};
pub use table::{load_table, parse_table, DataRecord, Label, LoadedTable, Split, TableError};
