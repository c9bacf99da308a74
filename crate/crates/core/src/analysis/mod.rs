//! Cross-task analysis: baseline scoreboards, paired model comparison and
//! corpus overlap.

pub mod contamination;
pub mod scoreboard;
pub mod tables;
pub mod wilcoxon;

pub use contamination::{
    contamination_scan, contamination_scan_chunked, contamination_scan_str, filtered_eval, truncate_chars,
    ContaminationReport, FeatureSet, RecordFlag, ScanChunking, MAX_PATTERN_CHARS,
};
pub use scoreboard::{
    median, median_relative_difference_by_feature_type, relative_difference, scoreboard, ScoreError,
    ScoreRow, Scoreboard, ScoreboardOptions,
};
pub use tables::{load_pairs, load_score_rows, TableLoadError};
pub use wilcoxon::{
    compare_pairs, normalized_difference, signed_rank_test, wilcoxon_signed_rank, ComparisonResult,
    PValueMethod, PairedScore, Side, WilcoxonError,
};
