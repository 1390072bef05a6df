//! Blocking HTTP client for the model wire protocol.

use super::{
    Backend, FillMaskRequest, FillMaskResponse, GatewayError, HealthResponse, ScoreRequest, ScoreResponse,
    StatusKind,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_RETRIES: u32 = 2;

const REQUEST_ID_HEADER: &str = "x-request-id";
const BACKOFF_BASE: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    pub base_url: String,
    pub timeout: Duration,
    /// Extra attempts after the first one, for retryable failures only.
    pub retries: u32,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout: DEFAULT_TIMEOUT,
            retries: DEFAULT_RETRIES,
        }
    }
}

/// Every request gets its own id, sent as `x-request-id`, so concurrent
/// in-flight calls can be told apart in logs and errors.
#[derive(Debug)]
pub struct HttpBackend {
    config: EndpointConfig,
    client: reqwest::blocking::Client,
    next_id: AtomicU64,
}

impl HttpBackend {
    pub fn new(config: EndpointConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::Transport {
                request_id: 0,
                message: e.to_string(),
            })?;
        Ok(Self {
            config,
            client,
            next_id: AtomicU64::new(1),
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn classify(request_id: u64, err: reqwest::Error) -> GatewayError {
        if err.is_timeout() {
            GatewayError::Timeout { request_id }
        } else {
            GatewayError::Transport {
                request_id,
                message: err.to_string(),
            }
        }
    }

    fn attempt<T: DeserializeOwned>(&self, builder: reqwest::blocking::RequestBuilder, request_id: u64) -> Result<T, GatewayError> {
        let resp = builder
            .header(REQUEST_ID_HEADER, request_id.to_string())
            .send()
            .map_err(|e| Self::classify(request_id, e))?;
        let code = resp.status().as_u16();
        let body = resp.text().map_err(|e| Self::classify(request_id, e))?;
        if code != 200 {
            return Err(GatewayError::Status {
                code,
                kind: StatusKind::from_code(code),
                body,
            });
        }
        serde_json::from_str(&body).map_err(|e| GatewayError::Malformed(format!("request {request_id}: {e}")))
    }

    fn with_retries<T: DeserializeOwned>(
        &self,
        make: impl Fn() -> reqwest::blocking::RequestBuilder,
    ) -> Result<T, GatewayError> {
        let request_id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let mut attempt = 0;
        loop {
            match self.attempt(make(), request_id) {
                Err(e) if e.is_retryable() && attempt < self.config.retries => {
                    std::thread::sleep(BACKOFF_BASE * 2u32.pow(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, GatewayError> {
        let url = self.url(path);
        self.with_retries(|| self.client.post(&url).json(body))
    }

    /// Sends an arbitrary JSON body without client-side validation and
    /// returns the HTTP status. Used by the conformance checks.
    pub fn post_unchecked(&self, path: &str, body: &serde_json::Value) -> Result<u16, GatewayError> {
        let request_id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let resp = self
            .client
            .post(self.url(path))
            .header(REQUEST_ID_HEADER, request_id.to_string())
            .json(body)
            .send()
            .map_err(|e| Self::classify(request_id, e))?;
        Ok(resp.status().as_u16())
    }
}

impl Backend for HttpBackend {
    fn fill_mask(&self, request: &FillMaskRequest) -> Result<FillMaskResponse, GatewayError> {
        self.post("/v1/fill_mask", request)
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreResponse, GatewayError> {
        self.post("/v1/score", request)
    }

    fn health(&self) -> Result<HealthResponse, GatewayError> {
        let url = self.url("/v1/health");
        self.with_retries(|| self.client.get(&url))
    }
}
