use crate::corpus::{DataRecord, TaskManifest};
use crate::promptgen::{render_target, KnnIndex, PromptRecord};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<String>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            max_tokens: 512,
            temperature: 0.0,
            stop: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    #[serde(default)]
    pub option_scores: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub logprob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("request failed: {0}")]
    Connection(String),
    #[error("server answered status {0}")]
    Status(u16),
    #[error("unreadable response: {0}")]
    Decode(String),
}

impl TransportError {
    /// Client errors other than rate limiting are not worth retrying.
    pub fn retryable(&self) -> bool {
        match self {
            TransportError::Status(s) => *s == 429 || *s >= 500,
            _ => true,
        }
    }
}

pub trait ModelClient: Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, TransportError>;
}

/// JSON over HTTP POST: `{"prompt", "max_tokens", "temperature"}` in,
/// `{"text", "option_scores"?, "logprob"?}` out.
pub struct HttpClient {
    url: String,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpClient {
            url: url.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

impl ModelClient for HttpClient {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, TransportError> {
        let body = serde_json::to_value(request).expect("request serializes");
        let response = match self.agent.post(&self.url).send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) => return Err(TransportError::Status(code)),
            Err(e) => return Err(TransportError::Connection(e.to_string())),
        };
        let parsed: GenerationResponse = response
            .into_json()
            .map_err(|e| TransportError::Decode(e.to_string()))?;
        let finite = parsed.logprob.map_or(true, f64::is_finite)
            && parsed
                .option_scores
                .as_ref()
                .map_or(true, |m| m.values().all(|v| v.is_finite()));
        if !finite {
            return Err(TransportError::Decode("non-finite score".into()));
        }
        Ok(parsed)
    }
}

/// Answers every known prompt with a fixed completion; unknown prompts get
/// an empty one.
pub struct LookupStub {
    answers: HashMap<String, String>,
}

impl LookupStub {
    pub fn new(answers: HashMap<String, String>) -> Self {
        LookupStub { answers }
    }

    /// Echo stub: each prompt is answered with its own target.
    pub fn echo(prompts: &[PromptRecord]) -> Self {
        LookupStub::new(
            prompts
                .iter()
                .map(|p| (p.prompt.clone(), p.target.clone()))
                .collect(),
        )
    }

    /// 1-NN stub: each prompt is answered with the target of the most similar
    /// pool record. Prompts whose record has no neighbour get an empty answer.
    pub fn nearest_neighbour(
        manifest: &TaskManifest,
        prompts: &[PromptRecord],
        queries: &[DataRecord],
        pool: &[&DataRecord],
    ) -> Option<Self> {
        let index = KnnIndex::build(manifest, pool)?;
        let by_id: HashMap<&str, &DataRecord> = queries.iter().map(|r| (r.id.as_str(), r)).collect();
        let mut answers = HashMap::new();
        for p in prompts {
            let Some(q) = by_id.get(p.id.as_str()) else {
                continue;
            };
            if let Some(&(i, _)) = index.nearest(q, 1).first() {
                if let Ok(t) = render_target(&pool[i].label, manifest) {
                    answers.insert(p.prompt.clone(), t);
                }
            }
        }
        Some(LookupStub::new(answers))
    }
}

impl ModelClient for LookupStub {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, TransportError> {
        Ok(GenerationResponse {
            text: self.answers.get(&request.prompt).cloned().unwrap_or_default(),
            ..Default::default()
        })
    }
}

/// Always gives the same answer.
pub struct ConstantStub {
    pub answer: String,
}

impl ConstantStub {
    /// The most frequent target; ties go to the lexicographically last, so a
    /// balanced binary set answers `(B)`.
    pub fn majority<'a>(targets: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in targets {
            *counts.entry(t).or_default() += 1;
        }
        let answer = counts
            .into_iter()
            .max_by_key(|&(t, c)| (c, t))
            .map(|(t, _)| t.to_string())
            .unwrap_or_default();
        ConstantStub { answer }
    }
}

impl ModelClient for ConstantStub {
    fn generate(&self, _: &GenerationRequest) -> Result<GenerationResponse, TransportError> {
        Ok(GenerationResponse {
            text: self.answer.clone(),
            ..Default::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_breaks_ties_toward_b() {
        assert_eq!(ConstantStub::majority(["(A)", "(B)"]).answer, "(B)");
        assert_eq!(ConstantStub::majority(["(A)", "(A)", "(B)"]).answer, "(A)");
    }

    #[test]
    fn request_wire_format() {
        let v = serde_json::to_value(GenerationRequest::new("hi")).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"prompt": "hi", "max_tokens": 512, "temperature": 0.0})
        );
        let r: GenerationResponse = serde_json::from_str(r#"{"text": "(B)"}"#).unwrap();
        assert_eq!(r.text, "(B)");
        assert!(r.option_scores.is_none());
    }

    #[test]
    fn retry_classification() {
        assert!(TransportError::Status(503).retryable());
        assert!(TransportError::Status(429).retryable());
        assert!(!TransportError::Status(400).retryable());
        assert!(TransportError::Connection("refused".into()).retryable());
    }
}
