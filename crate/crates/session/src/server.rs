use std::collections::BTreeMap;
use std::convert::Infallible;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bci_core::devices::{discover, Device, Fleet};
use bci_core::intent::{DeviceCatalog, TaskPlan};
use bci_core::langmodel::{Detection, LanguageStore};
use bci_core::paradigm::ParadigmSpec;
use bci_core::signal::TrialFile;
use bci_core::tdca::TdcaModel;
use bci_gateway::LlmClient;
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio_stream::wrappers::UnboundedReceiverStream;

use crate::config::ServiceConfig;
use crate::engine::{Outcome, Session, SessionBuilder, SessionError};
use crate::state::{PendingAction, Phase, SessionFault, SessionState};

/// Everything the HTTP layer serves. Each session sits behind its own lock,
/// which is the single writer queue for that session.
pub struct Service {
    config: ServiceConfig,
    gateway: Arc<dyn LlmClient>,
    model: Option<Arc<TdcaModel>>,
    store: Arc<LanguageStore>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    latest: Mutex<Option<String>>,
}

impl Service {
    pub fn new(
        config: ServiceConfig,
        gateway: Arc<dyn LlmClient>,
        model: Option<Arc<TdcaModel>>,
        store: Arc<LanguageStore>,
    ) -> Result<Self, SessionError> {
        if let Some(m) = &model {
            if m.acquisition != config.acquisition {
                return Err(SessionError::Config(format!(
                    "model was calibrated for {:?}, config says {:?}",
                    m.acquisition, config.acquisition
                )));
            }
        }
        Ok(Self {
            config,
            gateway,
            model,
            store,
            sessions: RwLock::new(BTreeMap::new()),
            latest: Mutex::new(None),
        })
    }

    pub fn create_session(&self, language: Option<&str>) -> Result<String, SessionError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let mut settings = self.config.settings();
        if let Some(l) = language.filter(|l| !l.trim().is_empty()) {
            settings.language = l.trim().to_string();
        }
        let mut builder = SessionBuilder::new(settings, self.gateway.clone()).language_store(self.store.clone());
        if let Some(m) = &self.model {
            builder = builder.model(m.clone());
        }
        if let Some(dir) = &self.config.log_dir {
            std::fs::create_dir_all(dir)?;
            builder = builder.log_to(dir.join(format!("{id}.jsonl")))?;
        }
        let session = builder.start(&id)?;
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        *lock(&self.latest) = Some(id.clone());
        Ok(id)
    }

    pub fn session(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    pub fn store(&self) -> &LanguageStore {
        &self.store
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// A session as the API shows it: the state without the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub phase: Phase,
    pub spelled_buffer: String,
    pub language: String,
    pub paradigm: Option<ParadigmSpec>,
    pub page: usize,
    pub page_count: usize,
    pub pending_plan: Option<TaskPlan>,
    pub pending_confirm: Option<PendingAction>,
    pub prompt: Option<String>,
    pub last_error: Option<SessionFault>,
    pub model_ref: Option<String>,
    pub revision: u64,
    pub last_seq: u64,
    pub devices: Vec<Device>,
}

impl From<&SessionState> for SessionView {
    fn from(s: &SessionState) -> Self {
        Self {
            session_id: s.session_id.clone(),
            phase: s.phase,
            spelled_buffer: s.spelled_buffer.clone(),
            language: s.language.clone(),
            paradigm: s.active_paradigm().cloned(),
            page: s.page,
            page_count: s.pages.len(),
            pending_plan: s.pending_plan.clone(),
            pending_confirm: s.pending_confirm.clone(),
            prompt: s.prompt.clone(),
            last_error: s.last_error.clone(),
            model_ref: s.model_ref.clone(),
            revision: s.revision,
            last_seq: s.last_seq(),
            devices: s.fleet.devices().to_vec(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CommandReply {
    pub outcome: Outcome,
    pub state: SessionView,
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::WrongPhase { .. } | SessionError::NoModel | SessionError::NotDecodable(_) => {
                StatusCode::CONFLICT
            }
            SessionError::EmptyText | SessionError::Config(_) => StatusCode::BAD_REQUEST,
            SessionError::UnknownBlock(_) => StatusCode::NOT_FOUND,
            SessionError::TrialMismatch(_) | SessionError::Decode(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Log(_) | SessionError::State(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self(status, e.to_string())
    }
}

type AppState = Arc<Service>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/health", get(|| async { Json(json!({ "ok": true })) }))
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", get(get_session))
        .route("/api/session/{id}/spell", post(spell))
        .route("/api/session/{id}/gaze", post(gaze))
        .route("/api/session/{id}/choose", post(choose))
        .route("/api/session/{id}/reset", post(reset))
        .route("/api/session/{id}/paradigm", get(paradigm))
        .route("/api/session/{id}/events", get(events))
        .route("/api/devices", get(devices))
        .route("/api/lm/suggest", get(suggest))
        .route("/api/lm/detect", get(detect))
        .with_state(service)
}

fn find(service: &Service, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
    service
        .session(id)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session {id:?}")))
}

/// Runs a command on the session off the async runtime; gateway calls and
/// decoding block.
async fn run(
    service: &Service,
    id: &str,
    command: impl FnOnce(&mut Session) -> Result<Outcome, SessionError> + Send + 'static,
) -> Result<Json<CommandReply>, ApiError> {
    let session = find(service, id)?;
    tokio::task::spawn_blocking(move || {
        let mut s = lock(&session);
        let outcome = command(&mut s)?;
        Ok(Json(CommandReply {
            outcome,
            state: SessionView::from(s.state()),
        }))
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

#[derive(Debug, Default, Deserialize)]
struct CreateBody {
    language: Option<String>,
}

async fn create_session(
    State(service): State<AppState>,
    body: Option<Json<CreateBody>>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let id = service.create_session(body.language.as_deref())?;
    let session = find(&service, &id)?;
    let view = SessionView::from(lock(&session).state());
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(service): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let session = find(&service, &id)?;
    let view = SessionView::from(lock(&session).state());
    Ok(Json(view))
}

#[derive(Debug, Deserialize)]
struct SpellBody {
    text: String,
    language: Option<String>,
}

async fn spell(
    State(service): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<SpellBody>,
) -> Result<Json<CommandReply>, ApiError> {
    run(&service, &id, move |s| {
        s.submit_spelled_text(&body.text, body.language.as_deref())
    })
    .await
}

async fn gaze(
    State(service): State<AppState>,
    Path(id): Path<String>,
    Json(file): Json<TrialFile>,
) -> Result<Json<CommandReply>, ApiError> {
    let trial = file
        .into_trial()
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    run(&service, &id, move |s| s.submit_gaze_trial(&trial)).await
}

#[derive(Debug, Deserialize)]
struct ChooseBody {
    block_id: String,
}

async fn choose(
    State(service): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<ChooseBody>,
) -> Result<Json<CommandReply>, ApiError> {
    run(&service, &id, move |s| s.submit_block_choice(&body.block_id)).await
}

async fn reset(State(service): State<AppState>, Path(id): Path<String>) -> Result<Json<CommandReply>, ApiError> {
    run(&service, &id, Session::reset).await
}

async fn paradigm(State(service): State<AppState>, Path(id): Path<String>) -> Result<Json<ParadigmSpec>, ApiError> {
    let session = find(&service, &id)?;
    let spec = lock(&session).state().active_paradigm().cloned();
    spec.map(Json)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "no active paradigm".into()))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    after: u64,
}

/// Server-sent events: every event after `after`, then live events, each
/// exactly once and in seq order.
async fn events(
    State(service): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let session = find(&service, &id)?;
    let (backlog, rx) = lock(&session).subscribe(q.after);
    let stream = stream::iter(backlog).chain(UnboundedReceiverStream::new(rx)).map(|e| {
        let data = serde_json::to_string(&e).unwrap_or_default();
        Ok(Event::default().event(e.body.kind()).id(e.seq.to_string()).data(data))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

#[derive(Debug, Deserialize)]
struct DevicesQuery {
    session: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DevicesReply {
    pub session_id: Option<String>,
    pub catalog: DeviceCatalog,
    pub devices: Vec<Device>,
}

/// Devices of the named session, else of the newest one, else the demo fleet.
async fn devices(
    State(service): State<AppState>,
    Query(q): Query<DevicesQuery>,
) -> Result<Json<DevicesReply>, ApiError> {
    let id = match q.session {
        Some(id) => Some(id),
        None => lock(&service.latest).clone(),
    };
    let (session_id, fleet) = match id {
        Some(id) => {
            let session = find(&service, &id)?;
            let fleet = lock(&session).state().fleet.clone();
            (Some(id), fleet)
        }
        None => (None, Fleet::demo()),
    };
    Ok(Json(DevicesReply {
        session_id,
        catalog: discover(&fleet),
        devices: fleet.devices().to_vec(),
    }))
}

#[derive(Debug, Deserialize)]
struct SuggestQuery {
    #[serde(default)]
    ctx: String,
    #[serde(default)]
    lang: String,
    k: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SuggestReply {
    pub language: String,
    /// Set when `lang` was omitted and the language was detected.
    pub detection: Option<Detection>,
    pub suggestions: Vec<String>,
}

const MAX_SUGGESTIONS: usize = 50;

async fn suggest(
    State(service): State<AppState>,
    Query(q): Query<SuggestQuery>,
) -> Result<Json<SuggestReply>, ApiError> {
    let k = q.k.unwrap_or(5).min(MAX_SUGGESTIONS);
    if q.ctx.trim().is_empty() && q.lang.trim().is_empty() {
        return Ok(Json(SuggestReply {
            language: String::new(),
            detection: None,
            suggestions: Vec::new(),
        }));
    }
    let (language, detection) = if q.lang.trim().is_empty() || q.lang == "auto" {
        let d = service.store().detect(&q.ctx);
        (d.language.clone(), Some(d))
    } else {
        (q.lang.trim().to_string(), None)
    };
    let suggestions = match service.store().suggest(&q.ctx, &language, k) {
        Ok(s) => s,
        Err(_) if detection.is_some() => Vec::new(),
        Err(e) => return Err(ApiError(StatusCode::NOT_FOUND, e.to_string())),
    };
    Ok(Json(SuggestReply {
        language,
        detection,
        suggestions,
    }))
}

#[derive(Debug, Deserialize)]
struct DetectQuery {
    #[serde(default)]
    text: String,
}

async fn detect(State(service): State<AppState>, Query(q): Query<DetectQuery>) -> Json<Detection> {
    Json(service.store().detect(&q.text))
}
