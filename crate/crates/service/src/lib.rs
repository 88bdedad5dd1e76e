//! Local HTTP service that exposes clarification sessions.
//!
//! ```text
//! POST /sessions               {intent, budget_k?, pool_size?, rr_enabled?, reference_spec?}
//! POST /sessions/{id}/answer   {answer: "yes" | "no"}
//! GET  /sessions/{id}[?full=1]
//! GET  /health
//! ```
//!
//! Errors are `{"error": {"code": ..., "message": ...}}`.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;
use tracing::info;

use disambig_core::llm::{Gateway, LlmError};
use disambig_core::oracle::{Answerer, Oracle};
use disambig_core::pool::Answer;
use disambig_core::session::{
    AxisCounts, Clarifier, FinalResult, InstrumentationRecord, PendingQuestion, Session, SessionConfig, SessionError,
    SessionStatus, StepOutcome,
};
use disambig_core::spec::{normalize_labels, spec_from_value, Spec};

pub const DEFAULT_PORT: u16 = 8787;
pub const DEFAULT_TTL: Duration = Duration::from_secs(2 * 60 * 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// A human answers every question.
    #[default]
    Off,
    /// Sessions created with a `reference_spec` are answered automatically.
    Rule,
}

pub type GatewayFactory = dyn Fn() -> Gateway + Send + Sync;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub ttl: Duration,
    pub oracle_mode: OracleMode,
    pub defaults: SessionConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { ttl: DEFAULT_TTL, oracle_mode: OracleMode::Off, defaults: SessionConfig::default() }
    }
}

struct Entry {
    session: Session,
    clarifier: Clarifier,
    created_at: u64,
    last_access: Instant,
}

type Slot = Arc<Mutex<Entry>>;

#[derive(Clone)]
pub struct AppState {
    gateways: Arc<GatewayFactory>,
    config: ServiceConfig,
    sessions: Arc<Mutex<HashMap<String, Slot>>>,
}

impl AppState {
    pub fn new(gateways: Arc<GatewayFactory>, config: ServiceConfig) -> Self {
        Self { gateways, config, sessions: Arc::new(Mutex::new(HashMap::new())) }
    }

    pub async fn session_count(&self) -> usize {
        self.sessions.lock().await.len()
    }

    async fn slot(&self, id: &str) -> Result<Slot, ApiError> {
        self.evict_expired().await;
        self.sessions.lock().await.get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }

    /// Drops sessions idle for longer than the TTL. Sessions busy in a
    /// request are skipped.
    pub async fn evict_expired(&self) {
        let ttl = self.config.ttl;
        let mut sessions = self.sessions.lock().await;
        sessions.retain(|_, slot| match slot.try_lock() {
            Ok(entry) => entry.last_access.elapsed() < ttl,
            Err(_) => true,
        });
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session `{id}`"))
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::NoPendingQuestion | SessionError::SessionFinalized => {
                Self::new(StatusCode::CONFLICT, "wrong_state", e.to_string())
            }
            SessionError::InvalidConfig(_) => Self::new(StatusCode::BAD_REQUEST, "invalid_config", e.to_string()),
            SessionError::Llm(LlmError::InvalidRequest(_)) => {
                Self::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string())
            }
            SessionError::Llm(_) | SessionError::Answer(_) => {
                Self::new(StatusCode::SERVICE_UNAVAILABLE, "provider_unavailable", e.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": {"code": self.code, "message": self.message}}))).into_response()
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub intent: String,
    pub budget_k: Option<u32>,
    pub pool_size: Option<usize>,
    pub rr_enabled: Option<bool>,
    pub reference_spec: Option<Value>,
}

#[derive(Debug, Deserialize)]
struct AnswerBody {
    answer: Value,
}

#[derive(Debug, Deserialize)]
struct FullQuery {
    full: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    pub round: u32,
    pub text: String,
    pub axis: String,
    pub entropy_bits: f64,
}

impl From<&PendingQuestion> for QuestionView {
    fn from(q: &PendingQuestion) -> Self {
        Self {
            round: q.round,
            text: q.text.clone(),
            axis: q.disagreement.axis().to_string(),
            entropy_bits: q.disagreement.entropy_bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolStats {
    pub pool_size: usize,
    pub disagreement_counts: AxisCounts,
    pub rounds_used: u32,
    pub budget_k: u32,
    pub regen_count: u32,
}

fn pool_stats(s: &Session) -> PoolStats {
    let counts = if s.pool.is_empty() { AxisCounts::default() } else { AxisCounts::of(&s.pool.disagreements()) };
    PoolStats {
        pool_size: s.pool.len(),
        disagreement_counts: counts,
        rounds_used: s.rounds_used,
        budget_k: s.config.budget_k,
        regen_count: s.regen_count,
    }
}

fn state_name(s: &Session) -> &'static str {
    match (s.status, &s.pending) {
        (SessionStatus::Finalized, _) => "finalized",
        (_, Some(_)) => "awaiting_answer",
        (_, None) => "awaiting_question",
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", message)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
}

/// Answers pending questions from `oracle` until the session finalizes.
fn auto_answer(clarifier: &Clarifier, session: &mut Session, oracle: &Oracle) -> Result<(), SessionError> {
    while let Some(q) = session.pending.clone() {
        let answer = oracle.answer(Some(&q.disagreement.predicate), &q.text)?;
        clarifier.step(session, answer)?;
    }
    Ok(())
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let Json(body) = body.map_err(|e| bad_request(e.body_text()))?;
    if body.intent.trim().is_empty() {
        return Err(bad_request("intent must not be empty"));
    }
    let reference: Option<Spec> = match body.reference_spec {
        Some(v) => Some(normalize_labels(&spec_from_value(v).map_err(|e| bad_request(format!("reference_spec: {e}")))?)),
        None => None,
    };
    let defaults = &state.config.defaults;
    let config = SessionConfig {
        budget_k: body.budget_k.unwrap_or(defaults.budget_k),
        pool_size: body.pool_size.unwrap_or(defaults.pool_size),
        rr_enabled: body.rr_enabled.unwrap_or(defaults.rr_enabled),
        ..defaults.clone()
    };
    config.validate()?;

    let id = uuid::Uuid::new_v4().to_string();
    let clarifier = Clarifier::new((state.gateways)(), config);
    let auto = (state.config.oracle_mode == OracleMode::Rule).then_some(reference).flatten();
    let (task_id, intent) = (id.clone(), body.intent.clone());
    let (clarifier, session) = blocking(move || {
        let (mut session, _) = clarifier.start(&task_id, &intent).map_err(|abort| abort.error)?;
        if let Some(reference) = auto {
            auto_answer(&clarifier, &mut session, &Oracle::rule_based(&reference))?;
        }
        Ok::<_, SessionError>((clarifier, session))
    })
    .await??;

    let response = json!({
        "session_id": id,
        "state": state_name(&session),
        "first_question": session.pending.as_ref().map(QuestionView::from),
        "final_spec": session.final_spec(),
        "pool_stats": pool_stats(&session),
    });
    info!(session = %id, state = state_name(&session), "session created");
    let entry = Entry {
        session,
        clarifier,
        created_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        last_access: Instant::now(),
    };
    state.evict_expired().await;
    state.sessions.lock().await.insert(id, Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(response)))
}

async fn answer_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<AnswerBody>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let slot = state.slot(&id).await?;
    let unprocessable = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_answer", m);
    let Json(body) = body.map_err(|e| unprocessable(e.body_text()))?;
    let answer: Answer = match &body.answer {
        Value::String(s) if matches!(s.as_str(), "yes" | "no") => s.parse().expect("checked"),
        other => return Err(unprocessable(format!("answer must be \"yes\" or \"no\", got {other}"))),
    };

    let mut guard = slot.lock_owned().await;
    guard.last_access = Instant::now();
    if guard.session.status == SessionStatus::Finalized {
        return Err(SessionError::SessionFinalized.into());
    }
    if guard.session.pending.is_none() {
        return Err(SessionError::NoPendingQuestion.into());
    }
    let (guard, result) = blocking(move || {
        let mut guard = guard;
        let entry = &mut *guard;
        let result = entry.clarifier.step(&mut entry.session, answer);
        (guard, result)
    })
    .await?;
    let outcome = result?;
    let s = &guard.session;
    let record: Option<&InstrumentationRecord> = s.trace.last();
    let (next, final_result): (Option<QuestionView>, Option<&FinalResult>) = match &outcome {
        StepOutcome::Question(q) => (Some(q.into()), None),
        StepOutcome::Finalized(_) => (None, s.result.as_ref()),
    };
    Ok(Json(json!({
        "state": state_name(s),
        "next_question": next,
        "final_spec": final_result.map(|r| &r.spec),
        "termination": final_result.map(|r| r.termination),
        "pool_stats": pool_stats(s),
        "round_record": record,
    })))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FullQuery>,
) -> Result<Json<Value>, ApiError> {
    let slot = state.slot(&id).await?;
    let mut entry = slot.lock().await;
    entry.last_access = Instant::now();
    let full = matches!(q.full.as_deref(), Some("1" | "true"));
    let s = &entry.session;
    let pool: Vec<Value> = s
        .pool
        .candidates()
        .iter()
        .map(|c| {
            let mut v = json!({
                "id": c.id,
                "fingerprint": c.fingerprint,
                "born_round": c.born_round,
                "multiplicity": c.multiplicity(),
            });
            if full {
                v["specs"] = json!(c.variants());
            }
            v
        })
        .collect();
    Ok(Json(json!({
        "session_id": id,
        "created_at": entry.created_at,
        "state": state_name(s),
        "intent": s.intent,
        "config": s.config,
        "history": s.history,
        "trace": s.trace,
        "pending_question": s.pending.as_ref().map(QuestionView::from),
        "pool_stats": pool_stats(s),
        "pool": pool,
        "result": s.result,
    })))
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answer", post(answer_session))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!(%addr, "listening");
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.evict_expired().await;
        }
    });
    axum::serve(listener, router(state)).await
}
