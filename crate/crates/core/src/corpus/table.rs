use super::manifest::{TaskKind, TaskManifest};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Binary(bool),
    Number(f64),
    Text(String),
}

impl Label {
    pub fn parse(raw: &str, kind: TaskKind) -> Option<Label> {
        let raw = raw.trim();
        match kind {
            TaskKind::Binary => match raw.to_ascii_lowercase().as_str() {
                "1" | "1.0" | "true" | "yes" => Some(Label::Binary(true)),
                "0" | "0.0" | "false" | "no" => Some(Label::Binary(false)),
                _ => None,
            },
            TaskKind::Regression => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Label::Number),
            TaskKind::Generation => (!raw.is_empty()).then(|| Label::Text(raw.to_string())),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Label::Binary(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Label::Number(v) => Some(*v),
            _ => None,
        }
    }

    /// Raw form, as it would appear in a table cell.
    pub fn raw(&self) -> String {
        match self {
            Label::Binary(b) => (if *b { "1" } else { "0" }).to_string(),
            Label::Number(v) => v.to_string(),
            Label::Text(t) => t.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    pub id: String,
    /// Role name to raw feature value.
    pub features: BTreeMap<String, String>,
    pub label: Label,
    pub subtask: Option<String>,
    pub time: Option<String>,
    pub split: Option<Split>,
}

impl DataRecord {
    pub fn feature(&self, role: &str) -> Option<&str> {
        self.features.get(role).map(String::as_str)
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("reading table: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing table: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest has no {0}")]
    Incomplete(&'static str),
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("no usable rows ({dropped} dropped)")]
    NoRows { dropped: usize },
}

#[derive(Debug, Clone)]
pub struct LoadedTable {
    pub records: Vec<DataRecord>,
    pub dropped: usize,
}

/// Tab for `.tsv`, comma for `.csv`, otherwise whichever is more frequent in
/// the header line.
pub fn sniff_delimiter(path: &Path, header: &str) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        Some("csv") => b',',
        _ => {
            let tabs = header.matches('\t').count();
            let commas = header.matches(',').count();
            if tabs >= commas && tabs > 0 {
                b'\t'
            } else {
                b','
            }
        }
    }
}

pub fn load_table(path: &Path, manifest: &TaskManifest) -> Result<LoadedTable, TableError> {
    let text = std::fs::read_to_string(path)?;
    let header = text.lines().next().unwrap_or("");
    parse_table(&text, sniff_delimiter(path, header), manifest)
}

/// Rows with an empty mapped cell or an unparseable label are dropped and counted.
pub fn parse_table(text: &str, delimiter: u8, manifest: &TaskManifest) -> Result<LoadedTable, TableError> {
    let kind = manifest.kind.ok_or(TableError::Incomplete("kind"))?;
    let label_col = manifest
        .label_column
        .as_deref()
        .ok_or(TableError::Incomplete("label column"))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| TableError::MissingColumn(name.to_string()))
    };
    let label_at = find(label_col)?;
    let id_at = manifest.id_column.as_deref().map(find).transpose()?;
    let subtask_at = manifest.subtask_column.as_deref().map(find).transpose()?;
    let time_at = manifest.time_column.as_deref().map(find).transpose()?;
    let role_at = manifest
        .roles
        .iter()
        .map(|r| find(&r.column).map(|i| (r.name.clone(), i)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut records = Vec::new();
    let mut dropped = 0;
    for (row, result) in reader.records().enumerate() {
        let rec = result?;
        let cell = |i: usize| rec.get(i).map(str::trim).filter(|s| !s.is_empty());
        let mut features = BTreeMap::new();
        let mut complete = true;
        for (name, i) in &role_at {
            match cell(*i) {
                Some(v) => {
                    features.insert(name.clone(), v.to_string());
                }
                None => complete = false,
            }
        }
        let label = cell(label_at).and_then(|raw| Label::parse(raw, kind));
        let subtask = subtask_at.map(cell);
        let time = time_at.map(cell);
        let id = match id_at {
            Some(i) => cell(i).map(str::to_string),
            None => Some((row + 1).to_string()),
        };
        match (complete, label, subtask, time, id) {
            (true, Some(label), sub, time, Some(id))
                if sub.map_or(true, |s| s.is_some()) && time.map_or(true, |t| t.is_some()) =>
            {
                records.push(DataRecord {
                    id,
                    features,
                    label,
                    subtask: sub.flatten().map(str::to_string),
                    time: time.flatten().map(str::to_string),
                    split: None,
                })
            }
            _ => dropped += 1,
        }
    }
    if records.is_empty() {
        return Err(TableError::NoRows { dropped });
    }
    Ok(LoadedTable { records, dropped })
}
