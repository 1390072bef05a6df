//! The boundary to masked language models.
//!
//! Every model interaction goes through a [`Gateway`], which validates
//! requests before they leave the process and responses before they reach
//! the metrics. Two backends exist: [`HttpBackend`] speaks the JSON wire
//! protocol (`/v1/fill_mask`, `/v1/score`, `/v1/health`) and [`MockModel`]
//! answers from an in-process table.
//!
//! Templates carry the literal `{BLANK}` marker all the way to the backend;
//! translating it into a model's mask token is the server's job.

mod conformance;
mod http;
mod mock;

pub use conformance::{run_conformance, ConformanceCheck, ConformanceReport};
pub use http::{EndpointConfig, HttpBackend, DEFAULT_RETRIES, DEFAULT_TIMEOUT};
pub use mock::{FillRule, MockModel, MockTable, ScoreRule};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

pub const BLANK: &str = "{BLANK}";

/// Tolerance on the candidate-mode renormalization contract.
pub const CANDIDATE_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatusKind {
    /// 400: the server rejected the request as invalid.
    Rejected,
    /// 503: the model is still loading.
    Loading,
    /// 500: inference failed.
    Inference,
    Other,
}

impl StatusKind {
    pub fn from_code(code: u16) -> Self {
        match code {
            400 => StatusKind::Rejected,
            503 => StatusKind::Loading,
            500 => StatusKind::Inference,
            _ => StatusKind::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("transport failure on request {request_id}: {message}")]
    Transport { request_id: u64, message: String },
    #[error("request {request_id} timed out")]
    Timeout { request_id: u64 },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("server answered {code} ({kind:?}): {body}")]
    Status { code: u16, kind: StatusKind, body: String },
    #[error("invalid mock table: {0}")]
    InvalidTable(String),
    #[error("mock table has no entry for `{0}`")]
    NoMockEntry(String),
    #[error("endpoint `{0}` is neither an http(s) URL nor mock:<table.json>")]
    BadEndpoint(String),
}

impl GatewayError {
    pub(crate) fn is_retryable(&self) -> bool {
        match self {
            GatewayError::Transport { .. } | GatewayError::Timeout { .. } => true,
            GatewayError::Status { kind, .. } => matches!(kind, StatusKind::Loading | StatusKind::Inference),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillMaskRequest {
    pub text: String,
    pub top_k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<String>>,
}

impl FillMaskRequest {
    pub fn top_k(text: impl Into<String>, top_k: usize) -> Self {
        Self {
            text: text.into(),
            top_k,
            candidates: None,
        }
    }

    /// Ask for the probabilities of exactly these tokens, renormalized over the set.
    pub fn candidates(text: impl Into<String>, candidates: Vec<String>) -> Self {
        Self {
            text: text.into(),
            top_k: candidates.len(),
            candidates: Some(candidates),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let blanks = self.text.matches(BLANK).count();
        if blanks != 1 {
            return Err(GatewayError::Validation(format!(
                "fill-mask text must contain exactly one {BLANK} marker, found {blanks}"
            )));
        }
        if self.top_k == 0 {
            return Err(GatewayError::Validation("top_k must be at least 1".into()));
        }
        if let Some(cands) = &self.candidates {
            if cands.is_empty() {
                return Err(GatewayError::Validation("candidate list is empty".into()));
            }
            let unique: BTreeSet<&String> = cands.iter().collect();
            if unique.len() != cands.len() {
                return Err(GatewayError::Validation("candidate list has duplicates".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub token: String,
    pub prob: f64,
}

impl Prediction {
    pub fn new(token: impl Into<String>, prob: f64) -> Self {
        Self {
            token: token.into(),
            prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillMaskResponse {
    pub model_id: String,
    pub predictions: Vec<Prediction>,
}

impl FillMaskResponse {
    /// Checks the response against the request it answers.
    pub fn validate_for(&self, request: &FillMaskRequest) -> Result<(), GatewayError> {
        let bad = |msg: String| Err(GatewayError::Malformed(msg));
        for p in &self.predictions {
            if !(p.prob > 0.0 && p.prob <= 1.0) {
                return bad(format!("probability {} for `{}` outside (0, 1]", p.prob, p.token));
            }
        }
        if self.predictions.windows(2).any(|w| w[0].prob < w[1].prob) {
            return bad("predictions are not in non-increasing probability order".into());
        }
        match &request.candidates {
            None => {
                if self.predictions.len() > request.top_k {
                    return bad(format!(
                        "{} predictions returned for top_k={}",
                        self.predictions.len(),
                        request.top_k
                    ));
                }
            }
            Some(cands) => {
                let asked: BTreeSet<&str> = cands.iter().map(String::as_str).collect();
                let got: BTreeSet<&str> = self.predictions.iter().map(|p| p.token.as_str()).collect();
                if self.predictions.len() != cands.len() || asked != got {
                    return bad("candidate-mode response does not cover exactly the requested candidates".into());
                }
                let sum: f64 = self.predictions.iter().map(|p| p.prob).sum();
                if (sum - 1.0).abs() > CANDIDATE_SUM_TOLERANCE {
                    return bad(format!("candidate probabilities sum to {sum}, expected 1"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub text: String,
}

impl ScoreRequest {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.text.trim().is_empty() {
            return Err(GatewayError::Validation("score text is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub model_id: String,
    pub tokens: Vec<String>,
    pub log_probs: Vec<f64>,
}

impl ScoreResponse {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.tokens.len() != self.log_probs.len() {
            return Err(GatewayError::Malformed(format!(
                "{} tokens but {} log-probabilities",
                self.tokens.len(),
                self.log_probs.len()
            )));
        }
        if let Some(lp) = self.log_probs.iter().find(|lp| !(lp.is_finite() && **lp <= 0.0)) {
            return Err(GatewayError::Malformed(format!("log-probability {lp} is not a finite value <= 0")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub model_id: String,
    pub ok: bool,
}

/// A source of masked-LM predictions.
///
/// Implementations receive requests that already passed validation and
/// must be safe to call from many threads at once.
pub trait Backend: Send + Sync + fmt::Debug {
    fn fill_mask(&self, request: &FillMaskRequest) -> Result<FillMaskResponse, GatewayError>;
    fn score(&self, request: &ScoreRequest) -> Result<ScoreResponse, GatewayError>;
    fn health(&self) -> Result<HealthResponse, GatewayError>;
}

/// A validated, shareable handle to a model.
#[derive(Debug, Clone)]
pub struct Gateway {
    backend: Arc<dyn Backend>,
}

impl Gateway {
    pub fn new(backend: impl Backend + 'static) -> Self {
        Self {
            backend: Arc::new(backend),
        }
    }

    pub fn http(config: EndpointConfig) -> Result<Self, GatewayError> {
        Ok(Self::new(HttpBackend::new(config)?))
    }

    pub fn mock(table: MockTable) -> Result<Self, GatewayError> {
        Ok(Self::new(MockModel::from_table(table)?))
    }

    /// Opens `mock:<path to table.json>` or an `http(s)://` base URL.
    pub fn open(endpoint: &str, timeout: std::time::Duration, retries: u32) -> Result<Self, GatewayError> {
        if let Some(path) = endpoint.strip_prefix("mock:") {
            return Ok(Self::new(MockModel::load(Path::new(path))?));
        }
        if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
            return Self::http(EndpointConfig {
                base_url: endpoint.to_string(),
                timeout,
                retries,
            });
        }
        Err(GatewayError::BadEndpoint(endpoint.to_string()))
    }

    pub fn fill_mask(&self, request: &FillMaskRequest) -> Result<FillMaskResponse, GatewayError> {
        request.validate()?;
        let response = self.backend.fill_mask(request)?;
        response.validate_for(request)?;
        Ok(response)
    }

    pub fn score(&self, request: &ScoreRequest) -> Result<ScoreResponse, GatewayError> {
        request.validate()?;
        let response = self.backend.score(request)?;
        response.validate()?;
        Ok(response)
    }

    pub fn health(&self) -> Result<HealthResponse, GatewayError> {
        self.backend.health()
    }

    pub fn backend(&self) -> &dyn Backend {
        self.backend.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_word_table() -> MockTable {
        MockTable {
            model_id: "mock".into(),
            fill_mask: vec![FillRule {
                when: "*".into(),
                predictions: vec![("w1".into(), 0.6), ("w2".into(), 0.4)],
            }],
            ..MockTable::default()
        }
    }

    #[test]
    fn top_k_truncates_the_table() {
        let gw = Gateway::mock(two_word_table()).unwrap();
        let resp = gw.fill_mask(&FillMaskRequest::top_k("x {BLANK}", 1)).unwrap();
        assert_eq!(resp.predictions, vec![Prediction::new("w1", 0.6)]);
    }

    #[test]
    fn missing_blank_fails_before_dispatch() {
        let gw = Gateway::mock(two_word_table()).unwrap();
        let err = gw.fill_mask(&FillMaskRequest::top_k("no marker", 1)).unwrap_err();
        assert!(matches!(err, GatewayError::Validation(_)));
        let err = gw
            .fill_mask(&FillMaskRequest::top_k("{BLANK} and {BLANK}", 1))
            .unwrap_err();
        assert!(matches!(err, GatewayError::Validation(_)));
    }

    #[test]
    fn candidate_mode_orders_by_probability() {
        let gw = Gateway::mock(two_word_table()).unwrap();
        let req = FillMaskRequest::candidates("x {BLANK}", vec!["w2".into(), "w1".into()]);
        let resp = gw.fill_mask(&req).unwrap();
        assert_eq!(resp.predictions[0].token, "w1");
        assert_eq!(resp.predictions[1].token, "w2");
        assert!((resp.predictions[0].prob - 0.6).abs() < 1e-12);
        let sum: f64 = resp.predictions.iter().map(|p| p.prob).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn response_validation_catches_contract_breaks() {
        let req = FillMaskRequest::top_k("{BLANK}", 1);
        let resp = FillMaskResponse {
            model_id: "m".into(),
            predictions: vec![Prediction::new("a", 0.2), Prediction::new("b", 0.7)],
        };
        assert!(matches!(resp.validate_for(&req), Err(GatewayError::Malformed(_))));

        let req = FillMaskRequest::candidates("{BLANK}", vec!["a".into(), "b".into()]);
        let resp = FillMaskResponse {
            model_id: "m".into(),
            predictions: vec![Prediction::new("a", 0.5), Prediction::new("b", 0.4)],
        };
        assert!(matches!(resp.validate_for(&req), Err(GatewayError::Malformed(_))));

        let bad = ScoreResponse {
            model_id: "m".into(),
            tokens: vec!["a".into()],
            log_probs: vec![0.5],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_score_text_is_rejected() {
        let gw = Gateway::mock(MockTable {
            uniform_vocab: Some(100),
            ..MockTable::default()
        })
        .unwrap();
        assert!(matches!(
            gw.score(&ScoreRequest::new("  ")),
            Err(GatewayError::Validation(_))
        ));
    }

    #[test]
    fn uniform_mock_scores_every_token_equally() {
        let gw = Gateway::mock(MockTable {
            uniform_vocab: Some(100),
            ..MockTable::default()
        })
        .unwrap();
        let resp = gw.score(&ScoreRequest::new("one two three")).unwrap();
        assert_eq!(resp.tokens, ["one", "two", "three"]);
        for lp in resp.log_probs {
            assert!((lp - 0.01f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn open_rejects_unknown_schemes() {
        let err = Gateway::open("ftp://x", DEFAULT_TIMEOUT, DEFAULT_RETRIES).unwrap_err();
        assert!(matches!(err, GatewayError::BadEndpoint(_)));
    }
}
