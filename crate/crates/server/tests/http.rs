use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lighthouse_api::{AdvanceResponse, ErrorBody, ErrorKind, SessionLogs, SessionState, TxResult};
use lighthouse_core::{hash, Digest, MerlinChain};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let body = body.map_or_else(Body::empty, |v| Body::from(v.to_string()));
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body)
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

async fn ok<T: serde::de::DeserializeOwned>(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> T {
    let (status, bytes) = call(app, method, uri, body).await;
    assert_eq!(
        status,
        StatusCode::OK,
        "{}",
        String::from_utf8_lossy(&bytes)
    );
    serde_json::from_slice(&bytes).unwrap()
}

async fn err(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, ErrorBody) {
    let (status, bytes) = call(app, method, uri, body).await;
    assert!(!status.is_success());
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn health() {
    let app = lighthouse_server::app();
    let v: Value = ok(&app, "GET", "/health", None).await;
    assert_eq!(v["status"], "ok");
}

#[tokio::test]
async fn scenario_runs_and_verifies() {
    let app = lighthouse_server::app();
    let out: Value = ok(
        &app,
        "POST",
        "/v1/scenarios/run",
        Some(json!({
            "master_seed": 1,
            "blocks": 60,
            "producers": [{"name": "a", "strategy": {"kind": "honest", "interval_blocks": 2}}]
        })),
    )
    .await;
    assert_eq!(out["summary"]["pulses"], 30);
    let verdict: Value = ok(
        &app,
        "POST",
        "/v1/verify",
        Some(json!({
            "pulse_log": out["pulse_log"],
            "event_log": out["event_log"],
            "block_log": out["block_log"],
        })),
    )
    .await;
    assert_eq!(verdict["ok"], true);
    assert_eq!(verdict["rounds_checked"], 30);
}

#[tokio::test]
async fn config_errors_are_field_precise() {
    let app = lighthouse_server::app();
    let (status, body) = err(
        &app,
        "POST",
        "/v1/scenarios/run",
        Some(json!({
            "master_seed": 1,
            "blocks": 60,
            "miner": {"fraction": 1.5},
            "producers": [{"name": "a", "strategy": {"kind": "honest", "interval_blocks": 2}}]
        })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body.kind, ErrorKind::InvalidInput);
    assert_eq!(body.field.as_deref(), Some("miner.fraction"));

    let (status, body) = err(
        &app,
        "POST",
        "/v1/scenarios/run",
        Some(json!({"master_seed": 1, "blocks": 5, "producers": [], "typo": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body.message.contains("typo"), "{}", body.message);

    let (_, body) = err(
        &app,
        "POST",
        "/v1/bias",
        Some(json!({"fractions": [0.1], "trials": 10, "mode": "raw-blockhash"})),
    )
    .await;
    assert_eq!(body.field.as_deref(), Some("trials"));

    let (_, body) = err(
        &app,
        "POST",
        "/v1/naive-demo",
        Some(json!({"k_attempts": 0, "trials": 10})),
    )
    .await;
    assert_eq!(body.field.as_deref(), Some("k_attempts"));

    let (_, body) = err(
        &app,
        "POST",
        "/v1/verify",
        Some(json!({"pulse_log": "", "event_log": "nope", "block_log": ""})),
    )
    .await;
    assert_eq!(body.field.as_deref(), Some("event_log"));
}

#[tokio::test]
async fn livelock_is_a_simulation_failure() {
    let app = lighthouse_server::app();
    let (status, body) = err(
        &app,
        "POST",
        "/v1/scenarios/run",
        Some(json!({
            "master_seed": 1,
            "blocks": 5,
            "miner": {"fraction": 1.0, "strategy": {"kind": "discard_all"}, "discard_cap": 50},
            "producers": [{"name": "a", "strategy": {"kind": "honest", "interval_blocks": 1}}]
        })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body.kind, ErrorKind::SimulationFailed);
}

#[tokio::test]
async fn bias_and_naive_endpoints() {
    let app = lighthouse_server::app();
    let report: Value = ok(
        &app,
        "POST",
        "/v1/bias",
        Some(json!({"fractions": [0.5], "trials": 10000, "seed": 3, "mode": "raw-blockhash"})),
    )
    .await;
    assert_eq!(report["rows"][0]["trials"], 10000);
    let naive: Value = ok(
        &app,
        "POST",
        "/v1/naive-demo",
        Some(json!({"k_attempts": 10, "trials": 10000, "seed": 3})),
    )
    .await;
    assert!(naive["empirical_bias"].as_f64().unwrap() > 0.45);
}

fn reveal(sender: &str, v: Digest) -> Value {
    json!({"tx": "reveal", "sender": sender, "v": v, "u": 0})
}

#[tokio::test]
async fn interactive_session_pulses_and_verifies() {
    let app = lighthouse_server::app();
    let created: SessionState = ok(&app, "POST", "/v1/sessions", Some(json!({"seed": 9}))).await;
    let id = created.id;
    assert_eq!(created.tip.number, 0);

    let mut chain = MerlinChain::build(hash(b"session"), 20).unwrap();
    let (_, v1) = chain.next().unwrap();
    let _: SessionState = ok(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/transactions"),
        Some(json!({"tx": "register", "caller": "owner", "producer": "p", "v": v1, "u": 0})),
    )
    .await;
    let adv: AdvanceResponse = ok(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/advance"),
        Some(json!({"blocks": 2})),
    )
    .await;
    assert_eq!(adv.applied[0].result, TxResult::Registered);
    assert_eq!(adv.state.tip.number, 2);
    assert_eq!(adv.state.target_block, 2);

    // a broken link is rejected without touching state
    let _: SessionState = ok(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/transactions"),
        Some(reveal("p", hash(b"junk"))),
    )
    .await;
    let (_, v2) = chain.next().unwrap();
    let _: SessionState = ok(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/transactions"),
        Some(reveal("p", v2)),
    )
    .await;
    let adv: AdvanceResponse = ok(&app, "POST", &format!("/v1/sessions/{id}/advance"), None).await;
    assert!(
        matches!(adv.applied[0].result, TxResult::Rejected { ref reason } if reason == "broken_link")
    );
    let TxResult::Pulsed {
        lighthouse: Some(p),
        ..
    } = &adv.applied[1].result
    else {
        panic!("{:?}", adv.applied[1]);
    };
    assert_eq!(p.round, 0);

    let latest: Value = ok(
        &app,
        "GET",
        &format!("/v1/sessions/{id}/pulses/latest"),
        None,
    )
    .await;
    assert_eq!(latest["round"], 0);
    let first: Value = ok(&app, "GET", &format!("/v1/sessions/{id}/pulses/0"), None).await;
    assert_eq!(first, latest);
    let (status, _) = err(&app, "GET", &format!("/v1/sessions/{id}/pulses/5"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let logs: SessionLogs = ok(&app, "GET", &format!("/v1/sessions/{id}/logs"), None).await;
    let verdict: Value = ok(
        &app,
        "POST",
        "/v1/verify",
        Some(serde_json::to_value(&logs).unwrap()),
    )
    .await;
    assert_eq!(verdict["ok"], true, "{verdict}");

    let (status, _) = call(&app, "DELETE", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = err(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn advance_bounds() {
    let app = lighthouse_server::app();
    let s: SessionState = ok(&app, "POST", "/v1/sessions", None).await;
    let (status, body) = err(
        &app,
        "POST",
        &format!("/v1/sessions/{}/advance", s.id),
        Some(json!({"blocks": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body.field.as_deref(), Some("blocks"));
    let (status, _) = err(&app, "POST", "/v1/sessions/999/advance", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn session_config_is_checked() {
    let app = lighthouse_server::app();
    let (status, body) = err(
        &app,
        "POST",
        "/v1/sessions",
        Some(json!({"miner_fraction": 2.0})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body.field.as_deref(), Some("miner_fraction"));
}
