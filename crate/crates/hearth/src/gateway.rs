//! HTTP chat gateway: sessions, message intake, ordered event streams and
//! the device facade.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use hearth_core::coordinator::user_message;
use hearth_core::registry::CallError;
use hearth_core::session::{ChatMessage, Event, EventLog, EventSink, Session, SessionState};
use hearth_core::sim::FleetAccess;
use hearth_core::value::Value;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{mpsc, watch};

use crate::agent::{Agent, Conversation};

struct Slot {
    session: Session,
    busy: AtomicBool,
    log: Mutex<EventLog>,
    /// Latest emitted seq.
    tick: watch::Sender<u64>,
    queue: mpsc::UnboundedSender<ChatMessage>,
    conv: Mutex<Conversation>,
}

impl Slot {
    fn events_since(&self, from: u64) -> Vec<Event> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).since(from).to_vec()
    }
}

struct SlotSink<'a>(&'a Slot);

impl EventSink for SlotSink<'_> {
    fn emit(&mut self, event: Event) -> u64 {
        let seq = self.0.log.lock().unwrap_or_else(|e| e.into_inner()).emit(event);
        self.0.tick.send_replace(seq);
        seq
    }
}

pub struct Gateway {
    agent: Arc<Agent>,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    counter: AtomicU64,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` already exists")]
    DuplicateSession(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown device function {0}")]
    UnknownFunction(String),
    #[error("{0}")]
    DeviceFailure(String),
}

impl GatewayError {
    fn code(&self) -> (StatusCode, &'static str) {
        match self {
            GatewayError::UnknownSession(_) => (StatusCode::NOT_FOUND, "UnknownSession"),
            GatewayError::DuplicateSession(_) => (StatusCode::CONFLICT, "DuplicateSession"),
            GatewayError::BadRequest(_) => (StatusCode::BAD_REQUEST, "BadRequest"),
            GatewayError::UnknownFunction(_) => (StatusCode::NOT_FOUND, "UnknownFunction"),
            GatewayError::DeviceFailure(_) => (StatusCode::UNPROCESSABLE_ENTITY, "DeviceFailure"),
        }
    }
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let (status, class) = self.code();
        (status, Json(json!({ "error": self.to_string(), "class": class }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
pub struct NewSession {
    pub user_name: String,
    #[serde(default)]
    pub id: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct PostMessage {
    pub text: String,
}

#[derive(Debug, Default, Deserialize)]
pub struct FromSeq {
    #[serde(default)]
    pub from_seq: u64,
}

#[derive(Debug, Serialize)]
pub struct SessionInfo {
    pub id: String,
    pub user_name: String,
    pub state: SessionState,
    pub next_seq: u64,
}

#[derive(Debug, Default, Deserialize)]
pub struct DeviceCall {
    #[serde(default)]
    pub args: Vec<serde_json::Value>,
}

impl Gateway {
    pub fn new(agent: Arc<Agent>) -> Arc<Gateway> {
        Arc::new(Gateway { agent, sessions: RwLock::new(HashMap::new()), counter: AtomicU64::new(0) })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, GatewayError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| GatewayError::UnknownSession(id.into()))
    }

    /// Open a session and start its worker. Must run inside a tokio runtime.
    pub fn create_session(self: &Arc<Self>, user_name: &str, id: Option<String>) -> Result<String, GatewayError> {
        let user_name = user_name.trim();
        if user_name.is_empty() {
            return Err(GatewayError::BadRequest("user_name must not be empty".into()));
        }
        let mut sessions = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        let id = match id {
            Some(id) if id.trim().is_empty() => return Err(GatewayError::BadRequest("id must not be empty".into())),
            Some(id) if sessions.contains_key(&id) => return Err(GatewayError::DuplicateSession(id)),
            Some(id) => id,
            None => loop {
                let candidate = format!("s{}", self.counter.fetch_add(1, Ordering::SeqCst) + 1);
                if !sessions.contains_key(&candidate) {
                    break candidate;
                }
            },
        };
        let conv = self.agent.conversation(&id, user_name);
        let (queue, rx) = mpsc::unbounded_channel();
        let slot = Arc::new(Slot {
            session: conv.session.clone(),
            busy: AtomicBool::new(false),
            log: Mutex::new(EventLog::new()),
            tick: watch::Sender::new(0),
            queue,
            conv: Mutex::new(conv),
        });
        sessions.insert(id.clone(), slot.clone());
        tokio::spawn(worker(self.agent.clone(), slot, rx));
        log::info!("session {id} opened for {user_name}");
        Ok(id)
    }

    /// Record the message now (so it gets the next seq) and queue it for
    /// the session's worker.
    pub fn post_message(&self, id: &str, text: &str) -> Result<u64, GatewayError> {
        let slot = self.slot(id)?;
        let message = user_message(&slot.session, &mut SlotSink(&slot), text, &*self.agent.clock);
        let seq = message.seq;
        slot.queue
            .send(message)
            .map_err(|_| GatewayError::BadRequest("session worker has stopped".into()))?;
        Ok(seq)
    }

    pub fn events(&self, id: &str, from_seq: u64) -> Result<Vec<Event>, GatewayError> {
        Ok(self.slot(id)?.events_since(from_seq))
    }

    pub fn info(&self, id: &str) -> Result<SessionInfo, GatewayError> {
        let slot = self.slot(id)?;
        let next_seq = slot.log.lock().unwrap_or_else(|e| e.into_inner()).next_seq();
        let state = if slot.busy.load(Ordering::SeqCst) { SessionState::Processing } else { SessionState::Idle };
        Ok(SessionInfo { id: slot.session.id.clone(), user_name: slot.session.user_name.clone(), state, next_seq })
    }

    pub fn call_device(&self, owner: &str, function: &str, args: &[serde_json::Value]) -> Result<Value, GatewayError> {
        let args: Vec<Value> = args.iter().map(Value::from_json).collect();
        let mut fleet = self.agent.fleet.clone();
        self.agent
            .registry
            .call_api(&mut fleet, owner, function, &args)
            .map_err(|e| match e {
                CallError::UnknownFunction { .. } => GatewayError::UnknownFunction(format!("{owner}.{function}")),
                CallError::ArityMismatch { .. } | CallError::KindMismatch { .. } => GatewayError::BadRequest(e.to_string()),
                other => GatewayError::DeviceFailure(other.to_string()),
            })
    }

    fn stream(&self, id: &str, from_seq: u64) -> Result<impl Stream<Item = Result<SseEvent, Infallible>>, GatewayError> {
        let slot = self.slot(id)?;
        let rx = slot.tick.subscribe();
        let start = (slot, rx, from_seq, std::collections::VecDeque::<Event>::new());
        Ok(futures::stream::unfold(start, |(slot, mut rx, mut cursor, mut pending)| async move {
            loop {
                if let Some(event) = pending.pop_front() {
                    let data = serde_json::to_string(&event).expect("events serialize");
                    let sse = SseEvent::default().id(event.seq.to_string()).data(data);
                    return Some((Ok(sse), (slot, rx, cursor, pending)));
                }
                rx.mark_unchanged();
                let fresh = slot.events_since(cursor);
                if let Some(last) = fresh.last() {
                    cursor = last.seq + 1;
                    pending.extend(fresh);
                    continue;
                }
                if rx.changed().await.is_err() {
                    return None;
                }
            }
        }))
    }
}

async fn worker(agent: Arc<Agent>, slot: Arc<Slot>, mut rx: mpsc::UnboundedReceiver<ChatMessage>) {
    while let Some(message) = rx.recv().await {
        let agent = agent.clone();
        let slot = slot.clone();
        let joined = tokio::task::spawn_blocking(move || {
            slot.busy.store(true, Ordering::SeqCst);
            let mut conv = slot.conv.lock().unwrap_or_else(|e| e.into_inner());
            agent.handle(&mut conv, &mut SlotSink(&slot), message);
            slot.busy.store(false, Ordering::SeqCst);
        })
        .await;
        if let Err(e) = joined {
            log::error!("session turn panicked: {e}");
        }
    }
}

async fn create_session(
    State(gw): State<Arc<Gateway>>,
    Json(body): Json<NewSession>,
) -> Result<(StatusCode, Json<serde_json::Value>), GatewayError> {
    let id = gw.create_session(&body.user_name, body.id)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

async fn post_message(
    State(gw): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Json(body): Json<PostMessage>,
) -> Result<Json<serde_json::Value>, GatewayError> {
    let seq = gw.post_message(&id, &body.text)?;
    Ok(Json(json!({ "seq": seq })))
}

async fn stream_events(
    State(gw): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Query(q): Query<FromSeq>,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, GatewayError> {
    let stream = gw.stream(&id, q.from_seq)?;
    Ok(Sse::new(stream).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}

async fn event_log(
    State(gw): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Query(q): Query<FromSeq>,
) -> Result<Json<Vec<Event>>, GatewayError> {
    Ok(Json(gw.events(&id, q.from_seq)?))
}

async fn session_info(State(gw): State<Arc<Gateway>>, Path(id): Path<String>) -> Result<Json<SessionInfo>, GatewayError> {
    Ok(Json(gw.info(&id)?))
}

async fn device_snapshot(State(gw): State<Arc<Gateway>>) -> Json<serde_json::Value> {
    Json(gw.agent.fleet.read(|f| f.snapshot()))
}

async fn call_device(
    State(gw): State<Arc<Gateway>>,
    Path((owner, function)): Path<(String, String)>,
    body: Option<Json<DeviceCall>>,
) -> Result<Json<serde_json::Value>, GatewayError> {
    let call = body.map(|Json(b)| b).unwrap_or_default();
    let value = gw.call_device(&owner, &function, &call.args)?;
    Ok(Json(json!({ "value": value.to_json() })))
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/events", get(stream_events))
        .route("/sessions/{id}/log", get(event_log))
        .route("/devices", get(device_snapshot))
        .route("/devices/{id}/{function}", post(call_device))
        .with_state(gateway)
}

/// Bind and serve until Ctrl-C.
pub async fn serve(gateway: Arc<Gateway>, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| anyhow::anyhow!("cannot listen on {addr}: {e}"))?;
    log::info!("listening on http://{}", listener.local_addr()?);
    println!("hearth gateway listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(gateway))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
