use crate::corpus::MetricId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub task: String,
    pub feature_type: String,
    pub metric: MetricId,
    pub lower_is_better: bool,
    pub sota: Option<f64>,
    pub model: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("{0}: no baseline value")]
    MissingSota(String),
    #[error("{0}: baseline value is zero")]
    ZeroSota(String),
}

/// (model - sota) / sota, negated when lower values are better.
pub fn relative_difference(row: &ScoreRow) -> Result<f64, ScoreError> {
    let sota = row
        .sota
        .ok_or_else(|| ScoreError::MissingSota(row.task.clone()))?;
    if sota == 0.0 {
        return Err(ScoreError::ZeroSota(row.task.clone()));
    }
    let d = (row.model - sota) / sota;
    Ok(if row.lower_is_better { -d } else { d })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreboardOptions {
    /// Rows without a baseline count as exceeding it.
    pub missing_sota_exceeds: bool,
    /// "Near" means a relative difference of at least `-near_margin`.
    pub near_margin: f64,
}

impl Default for ScoreboardOptions {
    fn default() -> Self {
        ScoreboardOptions {
            missing_sota_exceeds: true,
            near_margin: 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Scoreboard {
    pub exceed: usize,
    pub near: usize,
    pub below: usize,
    pub no_sota: usize,
}

impl Scoreboard {
    pub fn near_or_above(&self) -> usize {
        self.exceed + self.near
    }

    pub fn total(&self) -> usize {
        self.exceed + self.near + self.below + self.no_sota
    }
}

// absorbs representation error at the inclusive boundary (0.9 vs 1.0 is -0.0999...98)
const BOUNDARY_SLACK: f64 = 1e-12;

pub fn scoreboard(rows: &[ScoreRow], options: ScoreboardOptions) -> Scoreboard {
    let mut b = Scoreboard::default();
    for row in rows {
        match relative_difference(row) {
            Ok(d) if d > 0.0 => b.exceed += 1,
            Ok(d) if d >= -options.near_margin - BOUNDARY_SLACK => b.near += 1,
            Ok(_) => b.below += 1,
            Err(_) if options.missing_sota_exceeds => b.exceed += 1,
            Err(_) => b.no_sota += 1,
        }
    }
    b
}

/// Middle value; the mean of the middle two for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Median relative difference per feature type, over rows with a usable baseline.
pub fn median_relative_difference_by_feature_type(rows: &[ScoreRow]) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in rows {
        if let Ok(d) = relative_difference(row) {
            groups.entry(row.feature_type.clone()).or_default().push(d);
        }
    }
    groups
        .into_iter()
        .filter_map(|(k, v)| median(&v).map(|m| (k, m)))
        .collect()
}
