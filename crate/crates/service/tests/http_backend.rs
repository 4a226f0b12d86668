use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use vexeval_core::inference::{
    BackendErrorKind, CompletionBackend, CompletionRequest, DecodeParams, RetryPolicy,
};
use vexeval_service::completion::{HttpBackend, HttpBackendConfig};

#[derive(Clone)]
enum Reply {
    Text(&'static str),
    Status(StatusCode, Option<&'static str>),
    Garbage,
    Sleep(Duration),
}

#[derive(Default)]
struct Stub {
    replies: VecDeque<Reply>,
    seen: Vec<(serde_json::Value, Option<String>)>,
}

async fn complete(
    State(stub): State<Arc<Mutex<Stub>>>,
    headers: axum::http::HeaderMap,
    Json(body): Json<serde_json::Value>,
) -> Response {
    let reply = {
        let mut s = stub.lock().unwrap();
        let auth = headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        s.seen.push((body, auth));
        s.replies.pop_front().unwrap_or(Reply::Text("default"))
    };
    match reply {
        Reply::Text(t) => Json(serde_json::json!({ "text": t })).into_response(),
        Reply::Status(code, retry) => match retry {
            Some(r) => (code, [("Retry-After", r)], "busy").into_response(),
            None => (code, "nope").into_response(),
        },
        Reply::Garbage => "not json".into_response(),
        Reply::Sleep(d) => {
            tokio::time::sleep(d).await;
            Json(serde_json::json!({ "text": "late" })).into_response()
        }
    }
}

/// Serves the stub on a runtime owned by a background thread, so the
/// blocking client can be used from the test thread.
fn spawn(replies: Vec<Reply>) -> (String, Arc<Mutex<Stub>>) {
    let state = Arc::new(Mutex::new(Stub {
        replies: replies.into(),
        ..Stub::default()
    }));
    let app = Router::new()
        .route("/v1/complete", post(complete))
        .with_state(state.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    (format!("http://{addr}/v1/complete"), state)
}

fn request() -> CompletionRequest {
    CompletionRequest::new("### Instruction: x", 25, &DecodeParams::default())
}

#[test]
fn success_returns_text_and_sends_the_wire_request() {
    let (url, stub) = spawn(vec![Reply::Text("Category: Affected<STOP>")]);
    let backend = HttpBackend::new(HttpBackendConfig {
        bearer_token: Some("tok".into()),
        context_window: Some(2048),
        ..HttpBackendConfig::new(&url)
    })
    .unwrap();
    let mut req = request();
    req.context_length = Some(1200);
    assert_eq!(backend.complete(&req).unwrap(), "Category: Affected<STOP>");
    assert_eq!(backend.context_window(), Some(2048));
    let seen = stub.lock().unwrap().seen.clone();
    let (body, auth) = &seen[0];
    assert_eq!(body["max_new_tokens"], 25);
    assert_eq!(body["stop"], "<STOP>");
    assert_eq!(body["beam_size"], 3);
    assert_eq!(body["context_length"], 1200);
    assert_eq!(auth.as_deref(), Some("Bearer tok"));
}

#[test]
fn error_statuses_are_classified() {
    let (url, _) = spawn(vec![
        Reply::Status(StatusCode::TOO_MANY_REQUESTS, Some("2")),
        Reply::Status(StatusCode::SERVICE_UNAVAILABLE, None),
        Reply::Status(StatusCode::BAD_REQUEST, None),
        Reply::Status(StatusCode::GATEWAY_TIMEOUT, None),
        Reply::Garbage,
    ]);
    let backend = HttpBackend::new(HttpBackendConfig::new(&url)).unwrap();
    let e = backend.complete(&request()).unwrap_err();
    assert_eq!(e.kind, BackendErrorKind::RateLimited);
    assert_eq!(e.retry_after_ms, Some(2000));
    assert_eq!(
        backend.complete(&request()).unwrap_err().kind,
        BackendErrorKind::Unavailable
    );
    let rejected = backend.complete(&request()).unwrap_err();
    assert_eq!(rejected.kind, BackendErrorKind::Rejected);
    assert!(!rejected.retryable());
    assert_eq!(
        backend.complete(&request()).unwrap_err().kind,
        BackendErrorKind::Timeout
    );
    assert_eq!(
        backend.complete(&request()).unwrap_err().kind,
        BackendErrorKind::Protocol
    );
}

#[test]
fn transport_failures_are_retryable() {
    let (url, _) = spawn(vec![Reply::Sleep(Duration::from_millis(500))]);
    let backend = HttpBackend::new(HttpBackendConfig {
        timeout: Duration::from_millis(100),
        ..HttpBackendConfig::new(&url)
    })
    .unwrap();
    let e = backend.complete(&request()).unwrap_err();
    assert_eq!(e.kind, BackendErrorKind::Timeout);
    assert!(e.retryable());

    let unreachable =
        HttpBackend::new(HttpBackendConfig::new("http://127.0.0.1:9/v1/complete")).unwrap();
    let e = unreachable.complete(&request()).unwrap_err();
    assert_eq!(e.kind, BackendErrorKind::Unavailable);
}

#[test]
fn retry_policy_recovers_from_a_transient_outage() {
    let (url, stub) = spawn(vec![
        Reply::Status(StatusCode::SERVICE_UNAVAILABLE, Some("0")),
        Reply::Text("ok"),
    ]);
    let backend = HttpBackend::new(HttpBackendConfig::new(&url)).unwrap();
    let policy = RetryPolicy {
        max_attempts: 3,
        initial_backoff_ms: 1,
        max_backoff_ms: 5,
    };
    let (text, attempts) = policy.run(|| backend.complete(&request())).unwrap();
    assert_eq!((text.as_str(), attempts), ("ok", 2));
    assert_eq!(stub.lock().unwrap().seen.len(), 2);
}
