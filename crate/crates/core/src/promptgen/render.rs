use super::binning::{bin_label, BinningSpec};
use crate::corpus::{fill_template, DataRecord, Label, Split, TaskKind, TaskManifest};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

/// Maps prompt text to an estimated token count.
pub type TokenEstimator = fn(&str) -> usize;

/// ceil(bytes / 4)
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub task: String,
    pub id: String,
    pub split: Option<Split>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub subtask: Option<String>,
    pub prompt: String,
    pub target: String,
    /// Raw label, kept so an evaluator needs nothing but this record.
    pub label: String,
    pub shots: Vec<String>,
    pub estimated_length: usize,
    pub over_budget: bool,
    #[serde(skip)]
    parts: Option<PromptParts>,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct PromptParts {
    header: String,
    shot_blocks: Vec<String>,
    query: String,
}

impl PromptParts {
    fn text(&self) -> String {
        let mut s = self.header.clone();
        for b in &self.shot_blocks {
            s.push_str(b);
        }
        s.push_str(&self.query);
        s
    }
}

impl PromptRecord {
    pub fn shot_count(&self) -> usize {
        self.shots.len()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("template placeholder {{{0}}} has no value")]
    Placeholder(String),
    #[error("label {0:?} does not fit the task kind")]
    Label(String),
    #[error("regression task has no fixed label range")]
    NoBinning,
    #[error("shot {shot:?} from {from:?} is not allowed for a {to:?} prompt")]
    ForbiddenShot {
        shot: String,
        from: Option<Split>,
        to: Option<Split>,
    },
    #[error("manifest is missing {0}")]
    Incomplete(&'static str),
}

/// Splits a prompt for `split` may draw shots from.
pub fn shot_source_splits(split: Option<Split>) -> &'static [Split] {
    match split {
        Some(Split::Train) | Some(Split::Valid) => &[Split::Train],
        Some(Split::Test) => &[Split::Train, Split::Valid],
        None => &Split::ALL,
    }
}

/// Answer text for a label: `(A)`/`(B)`, a zero-padded bin, or the raw text.
pub fn render_target(label: &Label, manifest: &TaskManifest) -> Result<String, RenderError> {
    let kind = manifest.kind.ok_or(RenderError::Incomplete("kind"))?;
    match (kind, label) {
        (TaskKind::Binary, Label::Binary(b)) => Ok(if *b { "(B)" } else { "(A)" }.to_string()),
        (TaskKind::Regression, Label::Number(y)) => {
            let spec = BinningSpec::from_manifest(manifest).ok_or(RenderError::NoBinning)?;
            bin_label(*y, &spec)
                .map(|(_, s)| s)
                .map_err(|_| RenderError::Label(y.to_string()))
        }
        (TaskKind::Generation, Label::Text(t)) => Ok(t.clone()),
        (_, other) => Err(RenderError::Label(other.raw())),
    }
}

fn lookup<'a>(record: &'a DataRecord) -> impl Fn(&str) -> Option<&'a str> {
    move |name| {
        if name == "subtask" {
            record.subtask.as_deref()
        } else {
            record.feature(name)
        }
    }
}

fn role_lines(record: &DataRecord, manifest: &TaskManifest) -> Result<String, RenderError> {
    let mut lines = Vec::with_capacity(manifest.roles.len());
    for role in &manifest.roles {
        let template = role
            .line
            .as_deref()
            .ok_or(RenderError::Incomplete("a line template"))?;
        lines.push(fill_template(template, lookup(record)).map_err(RenderError::Placeholder)?);
    }
    Ok(lines.join("\n\n"))
}

fn answer_prefix(manifest: &TaskManifest) -> &str {
    let at = manifest.answer.find("{answer}").unwrap_or(manifest.answer.len());
    manifest.answer[..at].trim_end()
}

/// Renders the query record with its shots, in the order given.
pub fn render_prompt(
    record: &DataRecord,
    manifest: &TaskManifest,
    shots: &[&DataRecord],
) -> Result<PromptRecord, RenderError> {
    let allowed = shot_source_splits(record.split);
    for s in shots {
        if !s.split.map_or(record.split.is_none(), |x| allowed.contains(&x)) {
            return Err(RenderError::ForbiddenShot {
                shot: s.id.clone(),
                from: s.split,
                to: record.split,
            });
        }
    }
    let fill = |t: &str| fill_template(t, lookup(record)).map_err(RenderError::Placeholder);
    let mut question = fill(&manifest.question)?;
    if manifest.kind == Some(TaskKind::Binary) {
        let (neg, pos) = match &manifest.options {
            (Some(n), Some(p)) => (n, p),
            _ => return Err(RenderError::Incomplete("binary options")),
        };
        question = format!("{question}\n\n(A) {neg} (B) {pos}");
    }
    let header = format!(
        "Instructions: {}\n\nContext: {}\n\nQuestion: {}\n\n",
        fill(&manifest.instruction)?,
        fill(manifest.context_for(record.subtask.as_deref()))?,
        question
    );
    let mut shot_blocks = Vec::with_capacity(shots.len());
    for s in shots {
        let target = render_target(&s.label, manifest)?;
        let answer = manifest.answer.replace("{answer}", &target);
        shot_blocks.push(format!("{}\n\n{}\n\n", role_lines(s, manifest)?, answer));
    }
    let query = format!("{}\n\n{}", role_lines(record, manifest)?, answer_prefix(manifest));
    let parts = PromptParts {
        header,
        shot_blocks,
        query,
    };
    let prompt = parts.text();
    Ok(PromptRecord {
        task: manifest.task.clone(),
        id: record.id.clone(),
        split: record.split,
        subtask: record.subtask.clone(),
        estimated_length: estimate_tokens(&prompt),
        prompt,
        target: render_target(&record.label, manifest)?,
        label: record.label.raw(),
        shots: shots.iter().map(|s| s.id.clone()).collect(),
        over_budget: false,
        parts: Some(parts),
    })
}

/// Drops shots from the end until the estimate fits `budget`; a prompt that
/// still does not fit with no shots is kept and flagged.
///
/// Records read back from JSONL have lost their block structure and are only
/// re-measured.
pub fn fit_length_budget(mut prompt: PromptRecord, budget: usize, estimator: TokenEstimator) -> PromptRecord {
    let mut estimate = estimator(&prompt.prompt);
    if let Some(parts) = prompt.parts.as_mut() {
        while estimate > budget && !parts.shot_blocks.is_empty() {
            parts.shot_blocks.pop();
            prompt.shots.pop();
            prompt.prompt = parts.text();
            estimate = estimator(&prompt.prompt);
        }
    }
    prompt.estimated_length = estimate;
    prompt.over_budget = estimate > budget;
    prompt
}

pub fn write_jsonl<'a>(
    prompts: impl IntoIterator<Item = &'a PromptRecord>,
    mut out: impl Write,
) -> std::io::Result<()> {
    for p in prompts {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<Vec<PromptRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
