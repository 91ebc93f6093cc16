//! HTTP + JSON service over a loaded [`Engine`].

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{MatchedPath, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use troubleshoot_core::domain::TicketRecord;
use troubleshoot_core::fault_analysis::{post_followup, CanonicalFollowUp, FollowUp, TemperatureGrid, TroubleshootSession};
use troubleshoot_core::routing::RoutingMethod;
use troubleshoot_core::{BackendError, ChatMessage, Corpus, Error as CoreError, FaultAnalysis};

use crate::engine::Engine;
use crate::error::AppError;

type Session = Arc<Mutex<TroubleshootSession>>;

#[derive(Debug, Default, Clone, Serialize)]
struct RouteStats {
    count: u64,
    errors: u64,
    total_ms: f64,
    max_ms: f64,
}

pub struct AppState {
    engine: RwLock<Arc<Engine>>,
    /// Ingested tickets land here and become searchable after a reindex.
    staged: Mutex<Corpus>,
    sessions: RwLock<HashMap<String, Session>>,
    next_session: AtomicU64,
    stats: Mutex<BTreeMap<String, RouteStats>>,
}

impl AppState {
    pub fn new(engine: Engine) -> Arc<Self> {
        Arc::new(AppState {
            staged: Mutex::new(engine.corpus.clone()),
            engine: RwLock::new(Arc::new(engine)),
            sessions: RwLock::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            stats: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn engine(&self) -> Arc<Engine> {
        self.engine.read().expect("engine lock").clone()
    }

    fn session(&self, id: &str) -> Result<Session, ApiError> {
        self.sessions
            .read()
            .expect("session lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::from(AppError::Core(CoreError::UnknownSession(id.to_string()))))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        let status = match &e {
            AppError::NotFound(_) | AppError::Core(CoreError::UnknownSession(_)) => StatusCode::NOT_FOUND,
            AppError::Core(CoreError::Backend(b)) | AppError::Core(CoreError::AllCandidatesFailed(b))
                if !matches!(b, BackendError::Precondition(_)) =>
            {
                StatusCode::BAD_GATEWAY
            }
            e if e.is_validation() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        AppError::Core(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Runs blocking pipeline work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: format!("worker failed: {e}"),
    })?
}

#[derive(Debug, Deserialize)]
pub struct RetrieveRequest {
    #[serde(flatten)]
    pub target: TicketRefFields,
    pub k: usize,
}

/// Either a corpus ticket id or an inline ticket record.
#[derive(Debug, Default, Deserialize)]
pub struct TicketRefFields {
    #[serde(default)]
    pub ticket_id: Option<String>,
    #[serde(default)]
    pub ticket: Option<TicketRecord>,
}

#[derive(Debug, Deserialize)]
pub struct RouteRequest {
    #[serde(flatten)]
    pub target: TicketRefFields,
    pub method: RoutingMethod,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub struct AnalyzeRequest {
    #[serde(flatten)]
    pub target: TicketRefFields,
    #[serde(default)]
    pub grid: Option<TemperatureGrid>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub struct SessionRequest {
    #[serde(flatten)]
    pub target: TicketRefFields,
    #[serde(default)]
    pub token_budget: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageRequest {
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub canonical: Option<CanonicalFollowUp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationView {
    pub ticket_id: String,
    pub fault_analysis_id: String,
    pub score: f64,
    pub tokens: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub first_assistant_turn: String,
    pub demonstrations: Vec<DemonstrationView>,
    pub no_demonstrations: bool,
    pub oversized_demonstration: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageReply {
    pub assistant_turn: String,
    pub parsed_report: Option<FaultAnalysis>,
    pub parse_failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub ticket_id: String,
    pub created_at: u64,
    pub demonstrations: Vec<DemonstrationView>,
    pub messages: Vec<ChatMessage>,
}

fn demonstration_views(s: &TroubleshootSession) -> Vec<DemonstrationView> {
    s.demonstrations
        .iter()
        .map(|d| DemonstrationView {
            ticket_id: d.ticket.id.clone(),
            fault_analysis_id: d.fault_analysis.id.clone(),
            score: d.score,
            tokens: d.tokens,
            truncated: d.truncated,
        })
        .collect()
}

fn resolve(engine: &Engine, t: &TicketRefFields) -> Result<troubleshoot_core::Ticket, ApiError> {
    Ok(engine.resolve_ticket(t.ticket_id.as_deref(), t.ticket.as_ref())?)
}

async fn ingest(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<serde_json::Value> {
    let record: TicketRecord = parse(&body)?;
    if record.id.trim().is_empty() {
        return Err(ApiError::bad_request("ticket id must be non-empty"));
    }
    let engine = st.engine();
    let label = match &record.team_label {
        Some(l) => Some(engine.labels.parse(l)?),
        None => None,
    };
    st.staged
        .lock()
        .expect("staged lock")
        .upsert_ticket(record.ticket(), label)?;
    Ok(Json(json!({ "id": record.id, "indexed": false })))
}

async fn retrieve(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<crate::engine::RetrieveResult> {
    let req: RetrieveRequest = parse(&body)?;
    if req.k == 0 {
        return Err(ApiError::bad_request("k must be >= 1"));
    }
    let engine = st.engine();
    blocking(move || {
        let t = resolve(&engine, &req.target)?;
        Ok(Json(engine.retrieve(&t, req.k)?))
    })
    .await
}

async fn route(
    State(st): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<troubleshoot_core::routing::RoutingPrediction> {
    let req: RouteRequest = parse(&body)?;
    let engine = st.engine();
    blocking(move || {
        let t = resolve(&engine, &req.target)?;
        let seed = req.seed.unwrap_or(engine.config.seed);
        Ok(Json(engine.route(&t, req.method, seed)?))
    })
    .await
}

async fn analyze(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<crate::engine::AnalyzeResult> {
    let req: AnalyzeRequest = parse(&body)?;
    if let Some(g) = &req.grid {
        g.validate()?;
    }
    let engine = st.engine();
    blocking(move || {
        let t = resolve(&engine, &req.target)?;
        let seed = req.seed.unwrap_or(engine.config.seed);
        Ok(Json(engine.analyze(&t, req.grid.as_ref(), seed)?))
    })
    .await
}

async fn create_session(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<SessionCreated> {
    let req: SessionRequest = parse(&body)?;
    if req.token_budget == Some(0) {
        return Err(ApiError::bad_request("token_budget must be >= 1"));
    }
    let engine = st.engine();
    let n = st.next_session.fetch_add(1, Ordering::Relaxed);
    let session_id = format!("s{n:08}");
    let created_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let session = blocking(move || {
        let t = resolve(&engine, &req.target)?;
        let seed = req.seed.unwrap_or(engine.config.seed);
        Ok(engine.open_session(&t, req.token_budget, seed, session_id, created_at)?)
    })
    .await?;
    let out = SessionCreated {
        session_id: session.session_id.clone(),
        first_assistant_turn: session.first_assistant_turn().to_string(),
        demonstrations: demonstration_views(&session),
        no_demonstrations: session.no_demonstrations,
        oversized_demonstration: session.oversized_demonstration,
    };
    st.sessions
        .write()
        .expect("session lock")
        .insert(out.session_id.clone(), Arc::new(Mutex::new(session)));
    Ok(Json(out))
}

async fn session_message(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<MessageReply> {
    let req: MessageRequest = parse(&body)?;
    let followup = match (req.text, req.canonical) {
        (Some(t), None) if !t.trim().is_empty() => FollowUp::Text(t),
        (None, Some(c)) => FollowUp::Canonical(c),
        _ => return Err(ApiError::bad_request("give exactly one of a non-empty `text` or `canonical`")),
    };
    let session = st.session(&id)?;
    let engine = st.engine();
    blocking(move || {
        let mut s = session.lock().expect("session lock");
        let reply = post_followup(&mut s, engine.generator.as_ref(), &followup)?;
        Ok(Json(MessageReply {
            assistant_turn: reply.text,
            parsed_report: reply.parsed_report,
            parse_failed: reply.parse_failed,
        }))
    })
    .await
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Transcript> {
    let session = st.session(&id)?;
    let s = session.lock().expect("session lock");
    Ok(Json(Transcript {
        session_id: s.session_id.clone(),
        ticket_id: s.ticket.id.clone(),
        created_at: s.created_at,
        demonstrations: demonstration_views(&s),
        messages: s.messages.clone(),
    }))
}

async fn reindex(State(st): State<Arc<AppState>>) -> ApiResult<serde_json::Value> {
    let config = st.engine().config.clone();
    let corpus = st.staged.lock().expect("staged lock").clone();
    let fresh = blocking(move || Ok(Engine::rebuild(config, corpus)?)).await?;
    let summary = json!({
        "tickets": fresh.corpus.ticket_count(),
        "fault_analyses": fresh.corpus.fault_count(),
        "rankers": fresh.ensemble.len(),
    });
    *st.engine.write().expect("engine lock") = Arc::new(fresh);
    Ok(Json(summary))
}

async fn healthz(State(st): State<Arc<AppState>>) -> Response {
    let config = st.engine().config.clone();
    let backends = tokio::task::spawn_blocking(move || config.probe_backends())
        .await
        .unwrap_or_default();
    let ok = backends.iter().all(|b| b.ok);
    let status = if ok { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    (
        status,
        Json(json!({ "status": if ok { "ok" } else { "degraded" }, "backends": backends })),
    )
        .into_response()
}

async fn metrics(State(st): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let engine = st.engine();
    let stats = st.stats.lock().expect("stats lock").clone();
    let staged = st.staged.lock().expect("staged lock").ticket_count();
    Json(json!({
        "tickets_indexed": engine.corpus.ticket_count(),
        "tickets_staged": staged,
        "fault_analyses": engine.corpus.fault_count(),
        "rankers": engine.ensemble.len(),
        "sessions": st.sessions.read().expect("session lock").len(),
        "requests": stats,
    }))
}

async fn record_stats(State(st): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    let key = format!(
        "{} {}",
        req.method(),
        req.extensions()
            .get::<MatchedPath>()
            .map_or_else(|| "unmatched".to_string(), |p| p.as_str().to_string())
    );
    let start = Instant::now();
    let resp = next.run(req).await;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let mut stats = st.stats.lock().expect("stats lock");
    let e = stats.entry(key).or_default();
    e.count += 1;
    if !resp.status().is_success() {
        e.errors += 1;
    }
    e.total_ms += ms;
    e.max_ms = e.max_ms.max(ms);
    resp
}

async fn require_token(State(token): State<Arc<str>>, req: Request, next: Next) -> Response {
    if req.uri().path() == "/healthz" {
        return next.run(req).await;
    }
    let ok = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| t == &*token);
    if ok {
        next.run(req).await
    } else {
        ApiError {
            status: StatusCode::UNAUTHORIZED,
            message: "missing or invalid bearer token".into(),
        }
        .into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let token = state.engine().config.auth_token.clone();
    let mut app = Router::new()
        .route("/tickets", post(ingest))
        .route("/retrieve", post(retrieve))
        .route("/route", post(route))
        .route("/analyze", post(analyze))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/message", post(session_message))
        .route("/admin/reindex", post(reindex))
        .route("/healthz", get(healthz))
        .route("/metrics", get(metrics))
        .route_layer(middleware::from_fn_with_state(state.clone(), record_stats))
        .with_state(state);
    if let Some(t) = token {
        app = app.layer(middleware::from_fn_with_state(Arc::<str>::from(t), require_token));
    }
    app
}

/// Binds `listen` and serves until Ctrl-C.
pub async fn serve(engine: Engine) -> crate::Result<()> {
    let listen = engine.config.listen.clone();
    let app = router(AppState::new(engine));
    let listener = tokio::net::TcpListener::bind(&listen)
        .await
        .map_err(|e| AppError::io(listen.clone(), e))?;
    eprintln!("listening on {}", listener.local_addr().map_err(|e| AppError::io(listen.clone(), e))?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| AppError::io(listen, e))
}
