//! Live timetabling sessions over HTTP.
//!
//! * `POST /api/sessions` with a `create` message starts a session.
//! * `POST /api/sessions/{id}` takes one control message and returns exactly
//!   one reply.
//! * `GET /api/sessions/{id}/stream` is a server-sent-events stream of
//!   snapshots, iteration reports and edit results.
//! * `GET /health` reports the number of live sessions.
//!
//! The full message schema is in `docs/protocol.md`.

pub mod message;
mod worker;

pub use message::{ClientMessage, EditOutcome, ServerMessage};
pub use worker::SessionHandle;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::stream::{self, Stream};
use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::atomic::Ordering;
use std::sync::{Arc, Mutex};
use std::time::Duration;
use timetable_core::session::Session;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, oneshot};
use worker::{Command, SessionHandle as Handle};

pub const PORT_ENV: &str = "TIMETABLE_PORT";
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Idle time after which a session without open streams is dropped.
    pub ttl: Duration,
    /// Minimum spacing of pushed snapshots while the solver runs.
    pub snapshot_interval: Duration,
    /// How often expired sessions are swept.
    pub sweep_every: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            ttl: Duration::from_secs(600),
            snapshot_interval: Duration::from_millis(50),
            sweep_every: Duration::from_secs(30),
        }
    }
}

/// Port from `TIMETABLE_PORT`, else the default.
pub fn port_from_env() -> u16 {
    std::env::var(PORT_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_PORT)
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Arc<Handle>>>>,
    config: ServiceConfig,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            sessions: Arc::new(Mutex::new(HashMap::new())),
            config,
        }
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    fn get(&self, id: &str) -> Option<Arc<Handle>> {
        let found = self.sessions.lock().unwrap().get(id).cloned();
        if let Some(h) = &found {
            h.touch();
        }
        found
    }

    /// Drops sessions idle past the TTL with no open stream. Returns how
    /// many were removed.
    pub fn sweep(&self) -> usize {
        let mut map = self.sessions.lock().unwrap();
        let before = map.len();
        let ttl = self.config.ttl;
        map.retain(|_, h| h.streams.load(Ordering::SeqCst) > 0 || h.idle_for() < ttl);
        before - map.len()
    }
}

fn reply(status: StatusCode, msg: &ServerMessage) -> Response {
    (status, Json(msg)).into_response()
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    reply(status, &ServerMessage::error(message))
}

fn parse_message(body: &[u8]) -> Result<ClientMessage, Response> {
    serde_json::from_slice(body).map_err(|e| {
        error(
            StatusCode::BAD_REQUEST,
            format!(
                "malformed message at line {} column {}: {e}",
                e.line(),
                e.column()
            ),
        )
    })
}

fn new_session_id() -> String {
    format!("{:016x}", rand::random::<u64>())
}

async fn create(State(app): State<AppState>, body: Bytes) -> Response {
    let msg = match parse_message(&body) {
        Ok(m) => m,
        Err(r) => return r,
    };
    let ClientMessage::Create {
        problem,
        weights,
        seed,
    } = msg
    else {
        return error(StatusCode::BAD_REQUEST, "expected a `create` message");
    };
    let problem = match problem.to_problem() {
        Ok(p) => p,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    };
    let session = match Session::new(problem, weights.unwrap_or_default(), seed) {
        Ok(s) => s,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    };
    let id = new_session_id();
    let handle = worker::spawn(id.clone(), session, app.config.snapshot_interval);
    let first = handle.latest_snapshot();
    app.sessions.lock().unwrap().insert(id, handle);
    reply(StatusCode::CREATED, &first)
}

async fn ask(
    handle: &Handle,
    make: impl FnOnce(oneshot::Sender<ServerMessage>) -> Command,
) -> Response {
    let (tx, rx) = oneshot::channel();
    if !handle.send(make(tx)) {
        return error(StatusCode::GONE, "session worker has stopped");
    }
    match rx.await {
        Ok(msg) => reply(StatusCode::OK, &msg),
        Err(_) => error(StatusCode::GONE, "session worker has stopped"),
    }
}

async fn control(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    let Some(handle) = app.get(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown session `{id}`"));
    };
    let msg = match parse_message(&body) {
        Ok(m) => m,
        Err(r) => return r,
    };
    match msg {
        ClientMessage::Create { .. } => {
            error(StatusCode::BAD_REQUEST, "`create` goes to /api/sessions")
        }
        ClientMessage::Start => ask(&handle, Command::Start).await,
        ClientMessage::Pause => {
            // Stop before the next iteration even if the worker is busy.
            handle.running.store(false, Ordering::SeqCst);
            ask(&handle, Command::Pause).await
        }
        ClientMessage::Step { n } => {
            handle.running.store(false, Ordering::SeqCst);
            ask(&handle, |tx| Command::Step(n, tx)).await
        }
        ClientMessage::Edit { edit } => ask(&handle, |tx| Command::Edit(edit, tx)).await,
        ClientMessage::SetWeights { weights } => {
            ask(&handle, |tx| {
                Command::Edit(worker::weights_edit(weights), tx)
            })
            .await
        }
        ClientMessage::GetSnapshot { view } => ask(&handle, |tx| Command::Snapshot(view, tx)).await,
    }
}

struct StreamGuard(Arc<std::sync::atomic::AtomicUsize>);

impl Drop for StreamGuard {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

struct StreamState {
    first: Option<Arc<ServerMessage>>,
    rx: broadcast::Receiver<Arc<ServerMessage>>,
    last_iteration: Option<u64>,
    _guard: StreamGuard,
}

fn to_event(msg: &ServerMessage) -> Event {
    let data = serde_json::to_string(msg).expect("server messages serialize");
    Event::default().event(msg.kind()).data(data)
}

/// Snapshots on one stream never repeat or go back in iteration index.
fn event_stream(handle: &Handle) -> impl Stream<Item = Result<Event, Infallible>> {
    handle.streams.fetch_add(1, Ordering::SeqCst);
    let state = StreamState {
        rx: handle.events.subscribe(),
        first: Some(handle.latest_snapshot()),
        last_iteration: None,
        _guard: StreamGuard(handle.streams.clone()),
    };
    stream::unfold(state, |mut st| async move {
        loop {
            let msg = match st.first.take() {
                Some(m) => m,
                None => match st.rx.recv().await {
                    Ok(m) => m,
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => return None,
                },
            };
            if let Some(i) = msg.snapshot_iteration() {
                if st.last_iteration.is_some_and(|last| i <= last) {
                    continue;
                }
                st.last_iteration = Some(i);
            }
            if matches!(*msg, ServerMessage::Error { .. }) {
                continue;
            }
            return Some((Ok(to_event(&msg)), st));
        }
    })
}

async fn subscribe(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(handle) = app.get(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown session `{id}`"));
    };
    Sse::new(event_stream(&handle))
        .keep_alive(KeepAlive::default())
        .into_response()
}

async fn health(State(app): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "sessions": app.session_count() }))
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/api/sessions", post(create))
        .route("/api/sessions/{id}", post(control))
        .route("/api/sessions/{id}/stream", get(subscribe))
        .with_state(app)
}

/// Serves until the listener fails. Expired sessions are swept in the
/// background.
pub async fn serve(listener: TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    let app = AppState::new(config.clone());
    let sweeper = app.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(config.sweep_every);
        loop {
            tick.tick().await;
            sweeper.sweep();
        }
    });
    axum::serve(listener, router(app)).await
}
