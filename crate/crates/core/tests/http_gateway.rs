//! Wire-protocol tests: the blocking client against a local axum server.

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use biaslens_core::gateway::{
    run_conformance, Backend, EndpointConfig, FillMaskRequest, FillRule, Gateway, GatewayError, HttpBackend,
    MockModel, MockTable, ScoreRequest, StatusKind,
};
use serde_json::{json, Value};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

#[derive(Clone)]
struct Server {
    model: Arc<MockModel>,
    /// Answer 503 to this many requests before serving normally.
    fail_first: Arc<AtomicUsize>,
    hits: Arc<AtomicUsize>,
    delay: Duration,
    garbage: bool,
}

fn table() -> MockTable {
    MockTable {
        model_id: "mock-http".into(),
        fill_mask: vec![FillRule {
            when: "*".into(),
            predictions: vec![
                ("capital".into(), 0.5),
                ("city".into(), 0.2),
                ("heart".into(), 0.1),
                ("the".into(), 0.05),
            ],
        }],
        uniform_vocab: Some(100),
        ..MockTable::default()
    }
}

type Reply = (StatusCode, Json<Value>);

async fn gate(s: &Server) -> Option<Reply> {
    s.hits.fetch_add(1, Ordering::SeqCst);
    if !s.delay.is_zero() {
        tokio::time::sleep(s.delay).await;
    }
    let remaining = s.fail_first.load(Ordering::SeqCst);
    if remaining > 0 {
        s.fail_first.fetch_sub(1, Ordering::SeqCst);
        return Some((StatusCode::SERVICE_UNAVAILABLE, Json(json!({"error": "loading"}))));
    }
    if s.garbage {
        return Some((StatusCode::OK, Json(json!({"unexpected": true}))));
    }
    None
}

async fn fill(State(s): State<Server>, Json(req): Json<FillMaskRequest>) -> Reply {
    if let Some(r) = gate(&s).await {
        return r;
    }
    if let Err(e) = req.validate() {
        return (StatusCode::BAD_REQUEST, Json(json!({"error": e.to_string()})));
    }
    match s.model.fill_mask(&req) {
        Ok(resp) => (StatusCode::OK, Json(serde_json::to_value(resp).unwrap())),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": e.to_string()}))),
    }
}

async fn score(State(s): State<Server>, Json(req): Json<ScoreRequest>) -> Reply {
    if let Some(r) = gate(&s).await {
        return r;
    }
    if let Err(e) = req.validate() {
        return (StatusCode::BAD_REQUEST, Json(json!({"error": e.to_string()})));
    }
    match s.model.score(&req) {
        Ok(resp) => (StatusCode::OK, Json(serde_json::to_value(resp).unwrap())),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": e.to_string()}))),
    }
}

async fn health(State(s): State<Server>) -> Reply {
    if let Some(r) = gate(&s).await {
        return r;
    }
    (StatusCode::OK, Json(serde_json::to_value(s.model.health().unwrap()).unwrap()))
}

struct Running {
    url: String,
    hits: Arc<AtomicUsize>,
}

fn spawn(fail_first: usize, delay: Duration, garbage: bool) -> Running {
    let state = Server {
        model: Arc::new(MockModel::from_table(table()).unwrap()),
        fail_first: Arc::new(AtomicUsize::new(fail_first)),
        hits: Arc::new(AtomicUsize::new(0)),
        delay,
        garbage,
    };
    let hits = state.hits.clone();
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new()
                .route("/v1/fill_mask", post(fill))
                .route("/v1/score", post(score))
                .route("/v1/health", get(health))
                .with_state(state);
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    Running {
        url: format!("http://{addr}"),
        hits,
    }
}

fn backend(url: &str, timeout: Duration, retries: u32) -> HttpBackend {
    HttpBackend::new(EndpointConfig {
        base_url: url.to_string(),
        timeout,
        retries,
    })
    .unwrap()
}

#[test]
fn conformance_suite_passes_against_reference_server() {
    let server = spawn(0, Duration::ZERO, false);
    let report = run_conformance(&backend(&server.url, Duration::from_secs(5), 0));
    for c in &report.checks {
        println!("{:<36} {} {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    assert!(report.all_passed());
    assert_eq!(report.model_id.as_deref(), Some("mock-http"));
}

#[test]
fn http_and_in_process_mock_agree() {
    let server = spawn(0, Duration::ZERO, false);
    let http = Gateway::http(EndpointConfig::new(&server.url)).unwrap();
    let local = Gateway::mock(table()).unwrap();
    let req = FillMaskRequest::candidates("Amit likes to {BLANK}", vec!["heart".into(), "capital".into()]);
    assert_eq!(http.fill_mask(&req).unwrap(), local.fill_mask(&req).unwrap());
    let req = ScoreRequest::new("a b c");
    assert_eq!(http.score(&req).unwrap(), local.score(&req).unwrap());
}

#[test]
fn validation_happens_before_any_network_call() {
    let server = spawn(0, Duration::ZERO, false);
    let gw = Gateway::http(EndpointConfig::new(&server.url)).unwrap();
    let err = gw.fill_mask(&FillMaskRequest::top_k("no marker", 3)).unwrap_err();
    assert!(matches!(err, GatewayError::Validation(_)));
    assert_eq!(server.hits.load(Ordering::SeqCst), 0);
}

#[test]
fn loading_server_is_retried_up_to_the_limit() {
    let server = spawn(2, Duration::ZERO, false);
    let b = backend(&server.url, Duration::from_secs(5), 2);
    let resp = b.fill_mask(&FillMaskRequest::top_k("x {BLANK}", 1)).unwrap();
    assert_eq!(resp.predictions[0].token, "capital");
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);

    let server = spawn(5, Duration::ZERO, false);
    let b = backend(&server.url, Duration::from_secs(5), 1);
    let err = b.fill_mask(&FillMaskRequest::top_k("x {BLANK}", 1)).unwrap_err();
    assert!(matches!(
        err,
        GatewayError::Status {
            code: 503,
            kind: StatusKind::Loading,
            ..
        }
    ));
    assert_eq!(server.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn bad_request_is_not_retried() {
    let server = spawn(0, Duration::ZERO, false);
    let b = backend(&server.url, Duration::from_secs(5), 3);
    // Bypass the gateway's own validation to reach the server.
    let err = b.fill_mask(&FillMaskRequest::top_k("no marker", 1)).unwrap_err();
    assert!(matches!(err, GatewayError::Status { code: 400, kind: StatusKind::Rejected, .. }));
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn slow_server_times_out() {
    let server = spawn(0, Duration::from_millis(1500), false);
    let b = backend(&server.url, Duration::from_millis(200), 0);
    let err = b.health().unwrap_err();
    assert!(matches!(err, GatewayError::Timeout { .. }), "{err}");
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let b = backend("http://127.0.0.1:9", Duration::from_secs(2), 0);
    let err = b.health().unwrap_err();
    assert!(matches!(err, GatewayError::Transport { .. }), "{err}");
}

#[test]
fn malformed_body_is_reported() {
    let server = spawn(0, Duration::ZERO, true);
    let gw = Gateway::http(EndpointConfig::new(&server.url)).unwrap();
    let err = gw.fill_mask(&FillMaskRequest::top_k("x {BLANK}", 1)).unwrap_err();
    assert!(matches!(err, GatewayError::Malformed(_)), "{err}");
}

#[test]
fn shared_client_serves_concurrent_callers() {
    let server = spawn(0, Duration::from_millis(20), false);
    let gw = Gateway::http(EndpointConfig::new(&server.url)).unwrap();
    let handles: Vec<_> = (0..16)
        .map(|i| {
            let gw = gw.clone();
            std::thread::spawn(move || gw.fill_mask(&FillMaskRequest::top_k(format!("n{i} {{BLANK}}"), 2)).unwrap())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap().predictions.len(), 2);
    }
}
