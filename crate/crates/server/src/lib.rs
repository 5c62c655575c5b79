//! HTTP/JSON front end for the lighthouse simulator. See `lighthouse-api`
//! for the route table and wire types.

mod error;
mod session;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use lighthouse_api::{
    AdvanceRequest, AdvanceResponse, BiasRequest, Health, NaiveRequest, SessionConfig, SessionLogs,
    SessionState, VerifyRequest, MAX_ADVANCE_BLOCKS,
};
use lighthouse_core::experiments::{
    bias_experiment, naive_combine_demo, parse_jsonl, run_scenario, verify_log, BiasReport,
    NaiveReport, ScenarioConfig, ScenarioOutput, Tx, Verdict,
};
use lighthouse_core::lighthouse::LighthousePulse;
use serde::de::DeserializeOwned;

pub use error::ApiError;
pub use session::Session;

/// Logs of long runs are large; allow them through.
const BODY_LIMIT: usize = 512 * 1024 * 1024;
const MAX_SESSIONS: usize = 1024;

#[derive(Default)]
pub struct AppState {
    sessions: Mutex<HashMap<u64, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

type Shared = Arc<AppState>;
type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn app() -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/scenarios/run", post(run))
        .route("/v1/bias", post(bias))
        .route("/v1/naive-demo", post(naive))
        .route("/v1/verify", post(verify))
        .route("/v1/sessions", post(create_session))
        .route(
            "/v1/sessions/:id",
            get(session_state).delete(delete_session),
        )
        .route("/v1/sessions/:id/transactions", post(enqueue))
        .route("/v1/sessions/:id/advance", post(advance))
        .route("/v1/sessions/:id/pulses", get(pulses))
        .route("/v1/sessions/:id/pulses/latest", get(latest_pulse))
        .route("/v1/sessions/:id/pulses/:index", get(pulse_at))
        .route("/v1/sessions/:id/logs", get(logs))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(Shared::default())
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::body(e.to_string()))
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

async fn run(body: Bytes) -> ApiResult<ScenarioOutput> {
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::body(e.to_string()))?;
    let config = ScenarioConfig::from_json(text)?;
    tracing::info!(
        seed = config.master_seed,
        blocks = config.blocks,
        "scenario"
    );
    blocking(move || Ok(run_scenario(&config)?)).await.map(Json)
}

async fn bias(body: Bytes) -> ApiResult<BiasReport> {
    let req: BiasRequest = parse(&body)?;
    tracing::info!(mode = %req.mode, trials = req.trials, "bias study");
    blocking(move || {
        Ok(bias_experiment(
            &req.fractions,
            req.trials,
            req.seed,
            req.mode,
        )?)
    })
    .await
    .map(Json)
}

async fn naive(body: Bytes) -> ApiResult<NaiveReport> {
    let req: NaiveRequest = parse(&body)?;
    blocking(move || Ok(naive_combine_demo(req.k_attempts, req.trials, req.seed)?))
        .await
        .map(Json)
}

async fn verify(body: Bytes) -> ApiResult<Verdict> {
    let req: VerifyRequest = parse(&body)?;
    blocking(move || {
        let pulses = parse_jsonl(&req.pulse_log)
            .map_err(|e| ApiError::invalid("pulse_log", e.to_string()))?;
        let events = parse_jsonl(&req.event_log)
            .map_err(|e| ApiError::invalid("event_log", e.to_string()))?;
        let blocks = parse_jsonl(&req.block_log)
            .map_err(|e| ApiError::invalid("block_log", e.to_string()))?;
        Ok(verify_log(&pulses, &events, &blocks))
    })
    .await
    .map(Json)
}

fn session(state: &AppState, id: u64) -> Result<Arc<Mutex<Session>>, ApiError> {
    state
        .sessions
        .lock()
        .expect("session map poisoned")
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("no session {id}")))
}

fn with_session<T>(
    state: &AppState,
    id: u64,
    f: impl FnOnce(&mut Session) -> Result<T, ApiError>,
) -> Result<T, ApiError> {
    let s = session(state, id)?;
    let mut guard = s
        .lock()
        .map_err(|_| ApiError::internal("session poisoned"))?;
    f(&mut guard)
}

async fn create_session(State(state): State<Shared>, body: Bytes) -> ApiResult<SessionState> {
    let config: SessionConfig = if body.is_empty() {
        SessionConfig::default()
    } else {
        parse(&body)?
    };
    let mut sessions = state.sessions.lock().expect("session map poisoned");
    if sessions.len() >= MAX_SESSIONS {
        return Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            lighthouse_api::ErrorKind::Internal,
            None,
            format!("session limit {MAX_SESSIONS} reached"),
        ));
    }
    let id = state.next_id.fetch_add(1, Ordering::Relaxed) + 1;
    let session = Session::new(id, &config)?;
    let snapshot = session.state();
    sessions.insert(id, Arc::new(Mutex::new(session)));
    tracing::info!(id, "session created");
    Ok(Json(snapshot))
}

async fn session_state(
    State(state): State<Shared>,
    Path(id): Path<u64>,
) -> ApiResult<SessionState> {
    with_session(&state, id, |s| Ok(s.state())).map(Json)
}

async fn delete_session(
    State(state): State<Shared>,
    Path(id): Path<u64>,
) -> Result<StatusCode, ApiError> {
    match state
        .sessions
        .lock()
        .expect("session map poisoned")
        .remove(&id)
    {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::not_found(format!("no session {id}"))),
    }
}

async fn enqueue(
    State(state): State<Shared>,
    Path(id): Path<u64>,
    body: Bytes,
) -> ApiResult<SessionState> {
    let tx: Tx = parse(&body)?;
    with_session(&state, id, |s| {
        s.enqueue(tx);
        Ok(s.state())
    })
    .map(Json)
}

async fn advance(
    State(state): State<Shared>,
    Path(id): Path<u64>,
    body: Bytes,
) -> ApiResult<AdvanceResponse> {
    let req: AdvanceRequest = if body.is_empty() {
        AdvanceRequest::default()
    } else {
        parse(&body)?
    };
    if req.blocks == 0 || req.blocks > MAX_ADVANCE_BLOCKS {
        return Err(ApiError::invalid(
            "blocks",
            format!("must be within 1..={MAX_ADVANCE_BLOCKS}"),
        ));
    }
    let s = session(&state, id)?;
    blocking(move || {
        let mut guard = s
            .lock()
            .map_err(|_| ApiError::internal("session poisoned"))?;
        guard
            .advance(req.blocks)
            .map_err(|e| ApiError::simulation(e.to_string()))
    })
    .await
    .map(Json)
}

async fn pulses(
    State(state): State<Shared>,
    Path(id): Path<u64>,
) -> ApiResult<Vec<LighthousePulse>> {
    with_session(&state, id, |s| Ok(s.contract().history().to_vec())).map(Json)
}

async fn latest_pulse(
    State(state): State<Shared>,
    Path(id): Path<u64>,
) -> ApiResult<LighthousePulse> {
    with_session(&state, id, |s| {
        s.contract()
            .history()
            .last()
            .cloned()
            .ok_or_else(|| ApiError::not_found("no pulse yet"))
    })
    .map(Json)
}

async fn pulse_at(
    State(state): State<Shared>,
    Path((id, index)): Path<(u64, usize)>,
) -> ApiResult<LighthousePulse> {
    with_session(&state, id, |s| {
        s.contract()
            .history()
            .get(index)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no pulse {index}")))
    })
    .map(Json)
}

async fn logs(State(state): State<Shared>, Path(id): Path<u64>) -> ApiResult<SessionLogs> {
    with_session(&state, id, |s| Ok(s.logs())).map(Json)
}

/// Serve [`app`] on an already bound listener until the task is dropped.
pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, app()).await
}
