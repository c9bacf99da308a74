use super::answers::{parse_binary_answer, parse_regression_answer};
use super::client::{GenerationRequest, GenerationResponse, ModelClient, TransportError};
use super::metrics::{accuracy, auprc, auroc, mae, mse, pearson, spearman};
use crate::corpus::{MetricId, TaskKind, TaskManifest};
use crate::promptgen::{BinningSpec, PromptRecord};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;
use txf_chem::reactant_set_equal;

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 4,
            base_delay: Duration::from_millis(200),
            max_delay: Duration::from_secs(5),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): doubling, capped.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub concurrency: usize,
    pub retry: RetryPolicy,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            concurrency: 4,
            retry: RetryPolicy::default(),
            max_tokens: 512,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRow {
    pub id: String,
    pub subtask: Option<String>,
    pub target: String,
    /// Raw label of the record.
    pub label: String,
    pub completion: String,
    pub prediction: String,
    /// What the metric consumes: ranking score, predicted value, or 0/1 match.
    pub score: f64,
    pub valid: bool,
    pub transport_failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub task: String,
    pub kind: TaskKind,
    pub metric: MetricId,
    pub lower_is_better: bool,
    /// `None` when the metric is undefined for these rows.
    pub value: Option<f64>,
    pub n: usize,
    pub invalid: usize,
    pub invalid_rate: f64,
    pub transport_failures: usize,
    pub subtask_values: BTreeMap<String, Option<f64>>,
    pub rows: Vec<ExampleRow>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("manifest is missing {0}")]
    Incomplete(&'static str),
}

fn call_with_retries(
    client: &dyn ModelClient,
    request: &GenerationRequest,
    retry: &RetryPolicy,
) -> Result<GenerationResponse, TransportError> {
    let mut attempt = 1;
    loop {
        match client.generate(request) {
            Ok(r) => return Ok(r),
            Err(e) if e.retryable() && attempt < retry.attempts => {
                std::thread::sleep(retry.delay(attempt));
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Responses in input order, at most `concurrency` requests in flight.
fn generate_all(
    prompts: &[PromptRecord],
    client: &dyn ModelClient,
    config: &EvalConfig,
) -> Vec<Result<GenerationResponse, TransportError>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<GenerationResponse, TransportError>>>> =
        Mutex::new(vec![None; prompts.len()]);
    let workers = config.concurrency.max(1).min(prompts.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= prompts.len() {
                    break;
                }
                let request = GenerationRequest {
                    prompt: prompts[i].prompt.clone(),
                    max_tokens: config.max_tokens,
                    temperature: config.temperature,
                    stop: None,
                };
                let r = call_with_retries(client, &request, &config.retry);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("every slot filled"))
        .collect()
}

fn score_row(
    kind: TaskKind,
    binning: Option<&BinningSpec>,
    prompt: &PromptRecord,
    response: Result<GenerationResponse, TransportError>,
) -> ExampleRow {
    let transport_failed = response.is_err();
    let response = response.unwrap_or_default();
    let text = response.text;
    let (prediction, score, valid) = match kind {
        TaskKind::Binary => {
            let a = parse_binary_answer(&text, response.option_scores.as_ref());
            let p = match a.class {
                Some(true) => "(B)",
                Some(false) => "(A)",
                None => "",
            };
            (p.to_string(), a.score, a.class.is_some())
        }
        TaskKind::Regression => {
            let spec = binning.expect("regression rows need binning");
            let a = parse_regression_answer(&text, spec);
            (a.value.to_string(), a.value, a.valid)
        }
        TaskKind::Generation => {
            let m = reactant_set_equal(text.trim(), &prompt.label);
            (text.trim().to_string(), m.score as f64, !m.invalid_prediction)
        }
    };
    ExampleRow {
        id: prompt.id.clone(),
        subtask: prompt.subtask.clone(),
        target: prompt.target.clone(),
        label: prompt.label.clone(),
        completion: text,
        prediction,
        score,
        valid: valid && !transport_failed,
        transport_failed,
    }
}

fn truth_class(label: &str) -> bool {
    matches!(label.trim(), "1" | "1.0" | "true")
}

/// Metric over one group of rows. Invalid binary answers count as the wrong
/// class for accuracy; every row enters every metric.
fn metric_over(metric: MetricId, rows: &[&ExampleRow]) -> Option<f64> {
    match metric {
        MetricId::Auroc | MetricId::Auprc | MetricId::Accuracy => {
            let labels: Vec<bool> = rows.iter().map(|r| truth_class(&r.label)).collect();
            match metric {
                MetricId::Auroc => auroc(&rows.iter().map(|r| r.score).collect::<Vec<_>>(), &labels),
                MetricId::Auprc => auprc(&rows.iter().map(|r| r.score).collect::<Vec<_>>(), &labels),
                _ => {
                    let predicted: Vec<bool> = rows
                        .iter()
                        .zip(&labels)
                        .map(|(r, &t)| match r.prediction.as_str() {
                            "(B)" => true,
                            "(A)" => false,
                            _ => !t,
                        })
                        .collect();
                    accuracy(&predicted, &labels)
                }
            }
        }
        MetricId::SetAccuracy => {
            if rows.is_empty() {
                None
            } else {
                Some(rows.iter().map(|r| r.score).sum::<f64>() / rows.len() as f64)
            }
        }
        _ => {
            let pred: Vec<f64> = rows.iter().map(|r| r.score).collect();
            let truth: Option<Vec<f64>> = rows.iter().map(|r| r.label.trim().parse().ok()).collect();
            let truth = truth?;
            match metric {
                MetricId::Mae => mae(&pred, &truth),
                MetricId::Mse => mse(&pred, &truth),
                MetricId::Pearson => pearson(&pred, &truth),
                MetricId::Spearman => spearman(&pred, &truth),
                _ => unreachable!(),
            }
        }
    }
}

/// Per-subtask values and their unweighted mean over the defined ones. Rows
/// without subtasks form a single group.
pub fn compute_metric(metric: MetricId, rows: &[ExampleRow]) -> (Option<f64>, BTreeMap<String, Option<f64>>) {
    if rows.iter().all(|r| r.subtask.is_none()) {
        let all: Vec<&ExampleRow> = rows.iter().collect();
        return (metric_over(metric, &all), BTreeMap::new());
    }
    let mut groups: BTreeMap<String, Vec<&ExampleRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry(r.subtask.clone().unwrap_or_default())
            .or_default()
            .push(r);
    }
    let values: BTreeMap<String, Option<f64>> = groups
        .into_iter()
        .map(|(k, g)| (k, metric_over(metric, &g)))
        .collect();
    let defined: Vec<f64> = values.values().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    (mean, values)
}

/// Builds an [`EvalResult`] from already-scored rows.
pub fn summarize(
    manifest_task: &str,
    kind: TaskKind,
    metric: MetricId,
    lower_is_better: bool,
    rows: Vec<ExampleRow>,
) -> EvalResult {
    let (value, subtask_values) = compute_metric(metric, &rows);
    let n = rows.len();
    let invalid = rows.iter().filter(|r| !r.valid).count();
    EvalResult {
        task: manifest_task.to_string(),
        kind,
        metric,
        lower_is_better,
        value,
        n,
        invalid,
        invalid_rate: if n == 0 { 0.0 } else { invalid as f64 / n as f64 },
        transport_failures: rows.iter().filter(|r| r.transport_failed).count(),
        subtask_values,
        rows,
    }
}

/// Runs every prompt through the model and scores the answers against the
/// manifest's metric. Failed requests are kept as invalid rows.
pub fn evaluate_task(
    manifest: &TaskManifest,
    prompts: &[PromptRecord],
    client: &dyn ModelClient,
    config: &EvalConfig,
) -> Result<EvalResult, EvalError> {
    let kind = manifest.kind.ok_or(EvalError::Incomplete("kind"))?;
    let metric = manifest.metric.ok_or(EvalError::Incomplete("metric"))?;
    let binning = BinningSpec::from_manifest(manifest);
    if kind == TaskKind::Regression && binning.is_none() {
        return Err(EvalError::Incomplete("a fixed label range"));
    }
    let responses = generate_all(prompts, client, config);
    let rows = prompts
        .iter()
        .zip(responses)
        .map(|(p, r)| score_row(kind, binning.as_ref(), p, r))
        .collect();
    Ok(summarize(
        &manifest.task,
        kind,
        metric,
        manifest.lower_is_better(),
        rows,
    ))
}

pub fn write_rows_csv(result: &EvalResult, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &result.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
