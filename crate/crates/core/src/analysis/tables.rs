//! Loaders for published result tables kept as CSV fixtures.
//!
//! Lines starting with `#` are comments. Empty numeric cells mean "not
//! available". The `best` column lists the column names printed as best in
//! that row, separated by `;`.

use super::scoreboard::ScoreRow;
use super::wilcoxon::{PairedScore, Side};
use crate::corpus::MetricId;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableLoadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Value { line: usize, message: String },
    #[error("missing column {0}")]
    MissingColumn(String),
}

fn strip_comments(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn parse_bool(s: &str) -> bool {
    matches!(s.trim().to_ascii_lowercase().as_str(), "true" | "1" | "yes")
}

fn parse_opt(s: &str, line: usize) -> Result<Option<f64>, TableLoadError> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("n/a") {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| TableLoadError::Value {
        line,
        message: format!("not a number: {s:?}"),
    })
}

#[derive(Deserialize)]
struct RawScore {
    task: String,
    feature_type: String,
    metric: String,
    lower_is_better: String,
    sota: String,
    model: String,
}

pub fn load_score_rows(text: &str) -> Result<Vec<ScoreRow>, TableLoadError> {
    let body = strip_comments(text);
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<RawScore>().enumerate() {
        let r = rec?;
        let line = i + 2;
        let metric: MetricId = r.metric.parse().map_err(|e| TableLoadError::Value {
            line,
            message: format!("{e}"),
        })?;
        out.push(ScoreRow {
            task: r.task,
            feature_type: r.feature_type,
            metric,
            lower_is_better: parse_bool(&r.lower_is_better),
            sota: parse_opt(&r.sota, line)?,
            model: parse_opt(&r.model, line)?.ok_or(TableLoadError::Value {
                line,
                message: "model value missing".into(),
            })?,
        });
    }
    Ok(out)
}

/// Pairs column `a` against column `b`. Exact ties take their winner from
/// the `best` column when exactly one of the two is listed there.
pub fn load_pairs(text: &str, a: &str, b: &str) -> Result<Vec<PairedScore>, TableLoadError> {
    let body = strip_comments(text);
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TableLoadError::MissingColumn(name.to_string()))
    };
    let (ti, li, ai, bi) = (col("task")?, col("lower_is_better")?, col(a)?, col(b)?);
    let best = headers.iter().position(|h| h == "best");
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let get = |idx: usize| rec.get(idx).unwrap_or("");
        let need = |idx: usize| {
            parse_opt(get(idx), line)?.ok_or(TableLoadError::Value {
                line,
                message: "value missing".into(),
            })
        };
        let listed: Vec<&str> = best
            .map(|bi| get(bi).split(';').map(str::trim).collect())
            .unwrap_or_default();
        let tie_winner = match (listed.contains(&a), listed.contains(&b)) {
            (true, false) => Some(Side::A),
            (false, true) => Some(Side::B),
            _ => None,
        };
        out.push(PairedScore {
            task: get(ti).to_string(),
            a: need(ai)?,
            b: need(bi)?,
            lower_is_better: parse_bool(get(li)),
            tie_winner,
        });
    }
    Ok(out)
}
