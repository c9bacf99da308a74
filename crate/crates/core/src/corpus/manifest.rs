//! Task manifests.
//!
//! A manifest is a UTF-8 text file of `key = value` lines. Blank lines and
//! lines starting with `#` are ignored; keys may not repeat.
//!
//! | key | value |
//! |---|---|
//! | `task` | task id |
//! | `kind` | `binary`, `regression` or `generation` |
//! | `data` | table file name, relative to the data directory |
//! | `id` | optional record id column (row number otherwise) |
//! | `label` | label column |
//! | `role.<name>` | `<feature type> <column>`; feature type is `smiles`, `amino_acid`, `nucleotide` or `text` |
//! | `line.<name>` | input line template for the role, e.g. `Drug SMILES: {drug}` |
//! | `instruction`, `context`, `question` | prompt texts (templates) |
//! | `context.<subtask>` | context override for one subtask |
//! | `option.negative`, `option.positive` | binary answer options, rendered `(A)` and `(B)` |
//! | `answer` | answer template, default `Answer: {answer}` |
//! | `label_range` | `<min> <max>`, or `fit` to fit on the train split |
//! | `levels` | regression bin count, default 1000 |
//! | `split` | `random`, `scaffold`, `cold_start`, `combination` or `temporal` |
//! | `split.key` | cold-start entity role |
//! | `split.roles` | the two roles forming a combination key |
//! | `split.time` | timestamp column for temporal splits |
//! | `metric` | `auroc`, `auprc`, `accuracy`, `spearman`, `pearson`, `mae`, `mse`, `set_accuracy` |
//! | `lower_is_better` | `true`/`false`; defaults from the metric |
//! | `subtask` | optional subtask column |
//!
//! Templates refer to role values as `{role}`; `{subtask}` is also available.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Binary,
    Regression,
    Generation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureType {
    Smiles,
    AminoAcid,
    Nucleotide,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    Random,
    Scaffold,
    ColdStart,
    Combination,
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Auroc,
    Auprc,
    Accuracy,
    Spearman,
    Pearson,
    Mae,
    Mse,
    SetAccuracy,
}

impl MetricId {
    pub fn lower_is_better(self) -> bool {
        matches!(self, MetricId::Mae | MetricId::Mse)
    }
}

macro_rules! keyword_enum {
    ($ty:ty { $($word:literal => $variant:expr),* $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($word => Ok($variant),)*
                    other => Err(format!("unknown {} {other:?}", stringify!($ty))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let word = match self {
                    $(v if *v == $variant => $word,)*
                    _ => unreachable!(),
                };
                f.write_str(word)
            }
        }
    };
}

keyword_enum!(TaskKind {
    "binary" => TaskKind::Binary,
    "regression" => TaskKind::Regression,
    "generation" => TaskKind::Generation,
});
keyword_enum!(FeatureType {
    "smiles" => FeatureType::Smiles,
    "amino_acid" => FeatureType::AminoAcid,
    "nucleotide" => FeatureType::Nucleotide,
    "text" => FeatureType::Text,
});
keyword_enum!(SplitMethod {
    "random" => SplitMethod::Random,
    "scaffold" => SplitMethod::Scaffold,
    "cold_start" => SplitMethod::ColdStart,
    "combination" => SplitMethod::Combination,
    "temporal" => SplitMethod::Temporal,
});
keyword_enum!(MetricId {
    "auroc" => MetricId::Auroc,
    "auprc" => MetricId::Auprc,
    "accuracy" => MetricId::Accuracy,
    "spearman" => MetricId::Spearman,
    "pearson" => MetricId::Pearson,
    "mae" => MetricId::Mae,
    "mse" => MetricId::Mse,
    "set_accuracy" => MetricId::SetAccuracy,
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Role {
    pub name: String,
    pub feature_type: FeatureType,
    pub column: String,
    /// Input line template; `None` is a validation failure.
    pub line: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LabelRange {
    Fixed { min: f64, max: f64 },
    FitOnTrain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskManifest {
    pub task: String,
    pub kind: Option<TaskKind>,
    pub data: Option<String>,
    pub id_column: Option<String>,
    pub label_column: Option<String>,
    pub roles: Vec<Role>,
    pub instruction: String,
    pub context: String,
    pub context_by_subtask: BTreeMap<String, String>,
    pub question: String,
    pub options: (Option<String>, Option<String>),
    pub answer: String,
    pub label_range: Option<LabelRange>,
    pub levels: u32,
    pub split: Option<SplitMethod>,
    pub cold_start_role: Option<String>,
    pub combination_roles: Option<(String, String)>,
    pub time_column: Option<String>,
    pub metric: Option<MetricId>,
    pub lower_is_better: Option<bool>,
    pub subtask_column: Option<String>,
}

pub const DEFAULT_ANSWER: &str = "Answer: {answer}";

impl Default for TaskManifest {
    fn default() -> Self {
        TaskManifest {
            task: String::new(),
            kind: None,
            data: None,
            id_column: None,
            label_column: None,
            roles: Vec::new(),
            instruction: String::new(),
            context: String::new(),
            context_by_subtask: BTreeMap::new(),
            question: String::new(),
            options: (None, None),
            answer: DEFAULT_ANSWER.to_string(),
            label_range: None,
            levels: 1000,
            split: None,
            cold_start_role: None,
            combination_roles: None,
            time_column: None,
            metric: None,
            lower_is_better: None,
            subtask_column: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ManifestError {
    pub line: usize,
    pub message: String,
}

impl TaskManifest {
    pub fn parse(text: &str) -> Result<TaskManifest, ManifestError> {
        let mut m = TaskManifest::default();
        let mut seen = BTreeSet::new();
        let mut lines: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let err = |message: String| ManifestError { line, message };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            let word = |v: &str| v.to_string();
            match key {
                "task" => m.task = word(value),
                "kind" => m.kind = Some(value.parse().map_err(err)?),
                "data" => m.data = Some(word(value)),
                "id" => m.id_column = Some(word(value)),
                "label" => m.label_column = Some(word(value)),
                "instruction" => m.instruction = word(value),
                "context" => m.context = word(value),
                "question" => m.question = word(value),
                "option.negative" => m.options.0 = Some(word(value)),
                "option.positive" => m.options.1 = Some(word(value)),
                "answer" => m.answer = word(value),
                "label_range" => {
                    m.label_range = Some(if value == "fit" {
                        LabelRange::FitOnTrain
                    } else {
                        let parts: Vec<&str> = value.split_whitespace().collect();
                        let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse()).collect();
                        match nums.as_deref() {
                            Ok([min, max]) => LabelRange::Fixed { min: *min, max: *max },
                            _ => return Err(err(format!("bad label_range {value:?}"))),
                        }
                    })
                }
                "levels" => m.levels = value.parse().map_err(|_| err(format!("bad levels {value:?}")))?,
                "split" => m.split = Some(value.parse().map_err(err)?),
                "split.key" => m.cold_start_role = Some(word(value)),
                "split.roles" => match value.split_whitespace().collect::<Vec<_>>()[..] {
                    [a, b] => m.combination_roles = Some((a.to_string(), b.to_string())),
                    _ => return Err(err("split.roles takes two role names".into())),
                },
                "split.time" => m.time_column = Some(word(value)),
                "metric" => m.metric = Some(value.parse().map_err(err)?),
                "lower_is_better" => {
                    m.lower_is_better = Some(value.parse().map_err(|_| err(format!("bad flag {value:?}")))?)
                }
                "subtask" => m.subtask_column = Some(word(value)),
                _ => {
                    if let Some(name) = key.strip_prefix("role.") {
                        let (ft, column) = value
                            .split_once(char::is_whitespace)
                            .ok_or_else(|| err("role takes `<feature type> <column>`".into()))?;
                        m.roles.push(Role {
                            name: name.to_string(),
                            feature_type: ft.parse().map_err(err)?,
                            column: column.trim().to_string(),
                            line: None,
                        });
                    } else if let Some(name) = key.strip_prefix("line.") {
                        lines.insert(name.to_string(), (line, word(value)));
                    } else if let Some(sub) = key.strip_prefix("context.") {
                        m.context_by_subtask.insert(sub.to_string(), word(value));
                    } else {
                        return Err(err(format!("unknown key {key:?}")));
                    }
                }
            }
        }
        for (name, (line, template)) in lines {
            match m.roles.iter_mut().find(|r| r.name == name) {
                Some(role) => role.line = Some(template),
                None => {
                    return Err(ManifestError {
                        line,
                        message: format!("line template for undeclared role {name:?}"),
                    })
                }
            }
        }
        Ok(m)
    }

    pub fn role(&self, name: &str) -> Option<&Role> {
        self.roles.iter().find(|r| r.name == name)
    }

    /// Metric direction, explicit or implied by the metric.
    pub fn lower_is_better(&self) -> bool {
        self.lower_is_better
            .or(self.metric.map(MetricId::lower_is_better))
            .unwrap_or(false)
    }

    pub fn context_for(&self, subtask: Option<&str>) -> &str {
        subtask
            .and_then(|s| self.context_by_subtask.get(s))
            .unwrap_or(&self.context)
    }

    /// Serialized form; parsing it gives back an equal manifest.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &str| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("task", &self.task);
        if let Some(k) = self.kind {
            kv("kind", &k.to_string());
        }
        if let Some(d) = &self.data {
            kv("data", d);
        }
        if let Some(c) = &self.id_column {
            kv("id", c);
        }
        if let Some(c) = &self.label_column {
            kv("label", c);
        }
        for r in &self.roles {
            kv(
                &format!("role.{}", r.name),
                &format!("{} {}", r.feature_type, r.column),
            );
        }
        for r in &self.roles {
            if let Some(l) = &r.line {
                kv(&format!("line.{}", r.name), l);
            }
        }
        kv("instruction", &self.instruction);
        kv("context", &self.context);
        for (s, c) in &self.context_by_subtask {
            kv(&format!("context.{s}"), c);
        }
        kv("question", &self.question);
        if let Some(o) = &self.options.0 {
            kv("option.negative", o);
        }
        if let Some(o) = &self.options.1 {
            kv("option.positive", o);
        }
        kv("answer", &self.answer);
        match self.label_range {
            Some(LabelRange::Fixed { min, max }) => kv("label_range", &format!("{min} {max}")),
            Some(LabelRange::FitOnTrain) => kv("label_range", "fit"),
            None => {}
        }
        kv("levels", &self.levels.to_string());
        if let Some(s) = self.split {
            kv("split", &s.to_string());
        }
        if let Some(r) = &self.cold_start_role {
            kv("split.key", r);
        }
        if let Some((a, b)) = &self.combination_roles {
            kv("split.roles", &format!("{a} {b}"));
        }
        if let Some(t) = &self.time_column {
            kv("split.time", t);
        }
        if let Some(m) = self.metric {
            kv("metric", &m.to_string());
        }
        if let Some(l) = self.lower_is_better {
            kv("lower_is_better", &l.to_string());
        }
        if let Some(s) = &self.subtask_column {
            kv("subtask", s);
        }
        out
    }
}

/// Names inside `{...}` in a template, in order of appearance.
pub fn placeholders(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close)
                if close > 0
                    && after[..close]
                        .bytes()
                        .all(|b| b.is_ascii_alphanumeric() || b == b'_') =>
            {
                out.push(&after[..close]);
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

/// Replaces every placeholder; an unknown name is returned as the error.
pub fn fill_template<'a>(template: &str, lookup: impl Fn(&str) -> Option<&'a str>) -> Result<String, String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    for name in placeholders(template) {
        let token = format!("{{{name}}}");
        let at = rest.find(&token).expect("placeholder located");
        out.push_str(&rest[..at]);
        out.push_str(lookup(name).ok_or_else(|| name.to_string())?);
        rest = &rest[at + token.len()..];
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Every manifest invariant, reported as data. Empty means valid.
pub fn validate_manifest(m: &TaskManifest) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut bad = |s: String| v.push(Violation(s));
    if m.task.is_empty() {
        bad("missing task id".into());
    }
    let kind = m.kind;
    if kind.is_none() {
        bad("missing kind".into());
    }
    if m.label_column.is_none() {
        bad("missing label column".into());
    }
    if m.roles.is_empty() {
        bad("no roles declared".into());
    }
    let mut names = BTreeSet::new();
    for r in &m.roles {
        if !names.insert(r.name.as_str()) {
            bad(format!("role {:?} declared twice", r.name));
        }
        match &r.line {
            None => bad(format!("role {:?} has no line template", r.name)),
            Some(l) => {
                for p in placeholders(l) {
                    if p != r.name && !m.roles.iter().any(|x| x.name == p) {
                        bad(format!("line.{} references undeclared role {p:?}", r.name));
                    }
                }
            }
        }
    }
    let texts = [
        ("instruction", &m.instruction),
        ("context", &m.context),
        ("question", &m.question),
    ];
    let subtask_texts = m.context_by_subtask.iter().map(|(_, c)| ("context override", c));
    for (what, text) in texts.into_iter().chain(subtask_texts) {
        for p in placeholders(text) {
            if p == "subtask" {
                if m.subtask_column.is_none() {
                    bad(format!("{what} uses {{subtask}} without a subtask column"));
                }
            } else if !names.contains(p) {
                bad(format!("{what} references undeclared role {p:?}"));
            }
        }
    }
    if m.question.is_empty() {
        bad("missing question".into());
    }
    if !m.context_by_subtask.is_empty() && m.subtask_column.is_none() {
        bad("per-subtask contexts without a subtask column".into());
    }
    if placeholders(&m.answer) != ["answer"] {
        bad("answer template must contain {answer} exactly once".into());
    }
    match kind {
        Some(TaskKind::Binary) => {
            if m.options.0.is_none() || m.options.1.is_none() {
                bad("binary task needs option.negative and option.positive".into());
            }
        }
        Some(TaskKind::Regression) => {
            match m.label_range {
                None => bad("regression task without label_range".into()),
                Some(LabelRange::Fixed { min, max }) => {
                    if !(min.is_finite() && max.is_finite() && min < max) {
                        bad(format!("label_range needs finite min < max, got {min} {max}"));
                    }
                }
                Some(LabelRange::FitOnTrain) => {}
            }
            if m.levels == 0 {
                bad("levels must be at least 1".into());
            }
        }
        _ => {}
    }
    match m.metric {
        None => bad("missing metric".into()),
        Some(metric) => {
            let allowed: &[MetricId] = match kind {
                Some(TaskKind::Binary) => &[MetricId::Auroc, MetricId::Auprc, MetricId::Accuracy],
                Some(TaskKind::Regression) => &[
                    MetricId::Spearman,
                    MetricId::Pearson,
                    MetricId::Mae,
                    MetricId::Mse,
                ],
                Some(TaskKind::Generation) => &[MetricId::SetAccuracy],
                None => &[],
            };
            if kind.is_some() && !allowed.contains(&metric) {
                bad(format!("metric {metric} does not fit a {} task", kind.unwrap()));
            }
            if let Some(flag) = m.lower_is_better {
                if flag != metric.lower_is_better() {
                    bad(format!("lower_is_better = {flag} contradicts metric {metric}"));
                }
            }
        }
    }
    match m.split {
        None => bad("missing split method".into()),
        Some(SplitMethod::Scaffold) => {
            if !m.roles.iter().any(|r| r.feature_type == FeatureType::Smiles) {
                bad("scaffold split needs a smiles role".into());
            }
        }
        Some(SplitMethod::ColdStart) => match &m.cold_start_role {
            None => bad("cold_start split needs split.key".into()),
            Some(r) if !names.contains(r.as_str()) => bad(format!("split.key names undeclared role {r:?}")),
            _ => {}
        },
        Some(SplitMethod::Combination) => match &m.combination_roles {
            None => bad("combination split needs split.roles".into()),
            Some((a, b)) => {
                for r in [a, b] {
                    if !names.contains(r.as_str()) {
                        bad(format!("split.roles names undeclared role {r:?}"));
                    }
                }
            }
        },
        Some(SplitMethod::Temporal) => {
            if m.time_column.is_none() {
                bad("temporal split needs split.time".into());
            }
        }
        Some(SplitMethod::Random) => {}
    }
    v
}
