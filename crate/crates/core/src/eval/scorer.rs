//! Client side of an automated quality scorer. The wire protocol is a JSON
//! POST of `{src, hyp, ref?}` answered by `{score}` in `[0, 1]`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::EvalError;
use crate::gateway::RetryPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub src: String,
    pub hyp: String,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub score: f64,
}

pub trait Scorer: Send + Sync {
    /// Raw scorer output, before range checking.
    fn raw_score(&self, request: &ScoreRequest) -> Result<f64, EvalError>;
}

/// Scores one hypothesis and rejects values outside `[0, 1]`.
pub fn score_external(scorer: &dyn Scorer, src: &str, hyp: &str, reference: Option<&str>) -> Result<f64, EvalError> {
    let request = ScoreRequest { src: src.into(), hyp: hyp.into(), reference: reference.map(Into::into) };
    let score = scorer.raw_score(&request)?;
    if !(0.0..=1.0).contains(&score) {
        return Err(EvalError::MalformedScore(format!("{score} is outside [0, 1]")));
    }
    Ok(score)
}

/// Always answers with the same value.
#[derive(Debug, Clone, Copy)]
pub struct FixedScorer(pub f64);

impl Scorer for FixedScorer {
    fn raw_score(&self, _request: &ScoreRequest) -> Result<f64, EvalError> {
        Ok(self.0)
    }
}

pub struct HttpScorer {
    endpoint: String,
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
}

impl HttpScorer {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, EvalError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EvalError::ScorerUnavailable(e.to_string()))?;
        Ok(Self { endpoint: endpoint.into(), client, retry: RetryPolicy::default() })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn attempt(&self, request: &ScoreRequest) -> Result<Result<f64, EvalError>, String> {
        let response = self.client.post(&self.endpoint).json(request).send().map_err(|e| e.to_string())?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(format!("http {status}"));
        }
        if !status.is_success() {
            return Ok(Err(EvalError::ScorerUnavailable(format!("http {status}"))));
        }
        Ok(response
            .json::<ScoreResponse>()
            .map(|r| r.score)
            .map_err(|e| EvalError::MalformedScore(e.to_string())))
    }
}

impl Scorer for HttpScorer {
    fn raw_score(&self, request: &ScoreRequest) -> Result<f64, EvalError> {
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts.max(1) {
            match self.attempt(request) {
                Ok(result) => return result,
                Err(message) => {
                    warn!(endpoint = %self.endpoint, attempt, %message, "scorer request failed");
                    last = message;
                    if attempt < self.retry.max_attempts {
                        std::thread::sleep(self.retry.delay_for(attempt));
                    }
                }
            }
        }
        Err(EvalError::ScorerUnavailable(format!("after {} attempts: {last}", self.retry.max_attempts)))
    }
}
