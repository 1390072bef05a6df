//! Wire-protocol conformance checks run from the client against a live server.

use super::{Backend, FillMaskRequest, GatewayError, HttpBackend, ScoreRequest, BLANK};
use serde::Serialize;
use serde_json::json;

const PROBE_TEXT: &str = "Paris is the {BLANK} of France.";
const SCORE_TEXT: &str = "Paris is the capital of France.";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformanceCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformanceReport {
    pub model_id: Option<String>,
    pub checks: Vec<ConformanceCheck>,
}

impl ConformanceReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &'static str, outcome: Result<String, String>) -> ConformanceCheck {
    match outcome {
        Ok(detail) => ConformanceCheck {
            name,
            passed: true,
            detail,
        },
        Err(detail) => ConformanceCheck {
            name,
            passed: false,
            detail,
        },
    }
}

fn describe(e: GatewayError) -> String {
    e.to_string()
}

pub fn run_conformance(backend: &HttpBackend) -> ConformanceReport {
    let mut checks = Vec::new();

    let health = backend.health();
    let model_id = health.as_ref().ok().map(|h| h.model_id.clone());
    checks.push(check(
        "health",
        match health {
            Ok(h) if h.ok && !h.model_id.is_empty() => Ok(format!("model {}", h.model_id)),
            Ok(h) => Err(format!("unhealthy or unnamed model: {h:?}")),
            Err(e) => Err(describe(e)),
        },
    ));

    let top = FillMaskRequest::top_k(PROBE_TEXT, 3);
    let top_resp = backend.fill_mask(&top);
    checks.push(check(
        "fill_mask_schema",
        match &top_resp {
            Ok(r) => r
                .validate_for(&top)
                .map(|_| format!("{} predictions", r.predictions.len()))
                .map_err(describe),
            Err(e) => Err(describe(e.clone())),
        },
    ));

    checks.push(check(
        "mask_substitution",
        match &top_resp {
            Ok(r) if r.predictions.is_empty() => Err("no predictions returned".into()),
            Ok(r) => match r.predictions.iter().find(|p| p.token.contains(BLANK) || p.token.trim().is_empty()) {
                Some(p) => Err(format!("suspicious token `{}`", p.token)),
                None => Ok("marker translated to the model mask token".into()),
            },
            Err(e) => Err(describe(e.clone())),
        },
    ));

    checks.push(check(
        "candidate_renormalization",
        match &top_resp {
            Ok(r) if !r.predictions.is_empty() => {
                let mut cands: Vec<String> = r.predictions.iter().map(|p| p.token.clone()).collect();
                if !cands.iter().any(|c| c == "the") {
                    cands.push("the".into());
                }
                let req = FillMaskRequest::candidates(PROBE_TEXT, cands);
                backend
                    .fill_mask(&req)
                    .and_then(|resp| {
                        resp.validate_for(&req)?;
                        Ok(resp.predictions.iter().map(|p| p.prob).sum::<f64>())
                    })
                    .map(|sum| format!("candidate mass {sum:.9}"))
                    .map_err(describe)
            }
            _ => Err("skipped: top-k probe failed".into()),
        },
    ));

    checks.push(check(
        "score_schema",
        backend
            .score(&ScoreRequest::new(SCORE_TEXT))
            .and_then(|r| {
                r.validate()?;
                if r.tokens.is_empty() {
                    return Err(GatewayError::Malformed("no tokens".into()));
                }
                Ok(format!("{} tokens", r.tokens.len()))
            })
            .map_err(describe),
    ));

    let bad_fill = backend.post_unchecked("/v1/fill_mask", &json!({"text": "no marker here", "top_k": 3}));
    checks.push(check(
        "fill_mask_rejects_missing_marker",
        match bad_fill {
            Ok(400) => Ok("400".into()),
            Ok(code) => Err(format!("expected 400, got {code}")),
            Err(e) => Err(describe(e)),
        },
    ));

    let bad_score = backend.post_unchecked("/v1/score", &json!({"text": ""}));
    checks.push(check(
        "score_rejects_empty_text",
        match bad_score {
            Ok(400) => Ok("400".into()),
            Ok(code) => Err(format!("expected 400, got {code}")),
            Err(e) => Err(describe(e)),
        },
    ));

    ConformanceReport { model_id, checks }
}
