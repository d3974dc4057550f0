//! HTTP transport for the delta protocol.
//!
//! * `GET /app?view=<name>` creates a session and returns an HTML page with
//!   the bootstrap message embedded.
//! * `POST /app/delta` takes one DELTA-CLIENT message and answers with the
//!   DELTA-SERVER message.
//! * `GET /assets/<path>` serves the browser engine's files.

mod assets;
mod page;

use std::fs::{File, OpenOptions};
use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use parking_lot::Mutex;
use serde_json::{json, Value};
use spiar_core::codec::to_canonical_bytes;
use spiar_core::traffic::{Direction, TrafficWriter};
use spiar_core::{
    decode_client, encode_client, encode_server, ApplicationDefinition, CodecError,
    DeltaClientMessage, Runtime, RuntimeError,
};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use assets::{content_type, resolve as resolve_asset, AssetPath};
pub use page::{
    bootstrap_json, bootstrap_page, extract_bootstrap, ExtractError, BOOTSTRAP_ELEMENT_ID,
};

pub const BIND_ENV: &str = "SPIAR_BIND";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("session idle timeout must be positive")]
    ZeroTimeout,
    #[error("invalid bind address `{0}`")]
    InvalidBind(String),
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("cannot open traffic log {path}: {source}")]
    Record { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    pub assets: PathBuf,
    pub idle_timeout: Duration,
    /// Append every exchange to this traffic log.
    pub record: Option<PathBuf>,
}

impl ServerConfig {
    pub fn new(bind: SocketAddr, assets: impl Into<PathBuf>) -> Self {
        ServerConfig {
            bind,
            assets: assets.into(),
            idle_timeout: Duration::from_secs(1800),
            record: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.idle_timeout.is_zero() {
            return Err(ConfigError::ZeroTimeout);
        }
        Ok(())
    }
}

/// `host:port` from the environment wins over the flag value.
pub fn resolve_bind(flag: SocketAddr, env: Option<&str>) -> Result<SocketAddr, ConfigError> {
    match env.map(str::trim).filter(|s| !s.is_empty()) {
        None => Ok(flag),
        Some(text) => {
            use std::net::ToSocketAddrs;
            text.to_socket_addrs()
                .ok()
                .and_then(|mut addrs| addrs.next())
                .ok_or_else(|| ConfigError::InvalidBind(text.to_owned()))
        }
    }
}

pub fn bind_from_env(flag: SocketAddr) -> Result<SocketAddr, ConfigError> {
    resolve_bind(flag, std::env::var(BIND_ENV).ok().as_deref())
}

/// Serialized writer for the traffic log. The lock is held across a whole
/// exchange so records of one session appear in processing order.
pub struct Recorder(Mutex<TrafficWriter<File>>);

impl Recorder {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Recorder(Mutex::new(TrafficWriter::new(file))))
    }
}

#[derive(Clone)]
struct AppState {
    runtime: Arc<Runtime>,
    assets: Arc<PathBuf>,
    recorder: Option<Arc<Recorder>>,
}

/// The routes without a listener, for embedding or in-process testing.
pub fn router(runtime: Arc<Runtime>, assets: PathBuf, recorder: Option<Arc<Recorder>>) -> Router {
    Router::new()
        .route("/app", get(bootstrap))
        .route("/app/delta", post(delta))
        .route("/assets/{*path}", get(asset))
        .with_state(AppState {
            runtime,
            assets: Arc::new(assets),
            recorder,
        })
}

/// A running server.
pub struct Server {
    addr: SocketAddr,
    runtime: Arc<Runtime>,
    shutdown: oneshot::Sender<()>,
    serve: JoinHandle<io::Result<()>>,
    sweeper: JoinHandle<()>,
}

impl Server {
    pub async fn bind(
        config: ServerConfig,
        app: ApplicationDefinition,
    ) -> Result<Server, ServeError> {
        Self::start(config, Runtime::new(app)).await
    }

    /// Like [`Server::bind`] with a caller-built runtime. The configured
    /// idle timeout replaces the runtime's.
    pub async fn start(config: ServerConfig, runtime: Runtime) -> Result<Server, ServeError> {
        config.validate()?;
        let runtime = Arc::new(runtime.with_idle_timeout(config.idle_timeout));
        let recorder = match &config.record {
            Some(path) => Some(Arc::new(Recorder::open(path).map_err(|source| {
                ServeError::Record {
                    path: path.clone(),
                    source,
                }
            })?)),
            None => None,
        };
        let listener = tokio::net::TcpListener::bind(config.bind)
            .await
            .map_err(|source| ServeError::Bind {
                addr: config.bind,
                source,
            })?;
        let addr = listener.local_addr()?;
        let app = router(Arc::clone(&runtime), config.assets.clone(), recorder);
        let (shutdown, signal) = oneshot::channel::<()>();
        let serve = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    signal.await.ok();
                })
                .await
        });
        let sweeper = tokio::spawn(sweep(Arc::clone(&runtime), config.idle_timeout));
        tracing::info!(%addr, assets = %config.assets.display(), "listening");
        Ok(Server {
            addr,
            runtime,
            shutdown,
            serve,
            sweeper,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn runtime(&self) -> &Arc<Runtime> {
        &self.runtime
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn shutdown(self) -> io::Result<()> {
        let _ = self.shutdown.send(());
        self.sweeper.abort();
        self.serve.await.map_err(io::Error::other)?
    }
}

async fn sweep(runtime: Arc<Runtime>, timeout: Duration) {
    let period = (timeout / 4).clamp(Duration::from_millis(10), Duration::from_secs(30));
    let mut ticker = tokio::time::interval(period);
    loop {
        ticker.tick().await;
        let expired = runtime.expire_idle();
        if expired > 0 {
            tracing::debug!(expired, "expired idle sessions");
        }
    }
}

// ---------------------------------------------------------------------------
// handlers

fn canonical(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_body(status: StatusCode, body: Value) -> Response {
    canonical(status, to_canonical_bytes(&body))
}

fn codec_error(err: &CodecError) -> Response {
    error_body(
        StatusCode::BAD_REQUEST,
        json!({"error": "malformed_message", "reason": err.to_string()}),
    )
}

fn runtime_error(err: &RuntimeError) -> Response {
    use RuntimeError::*;
    let (status, body) = match err {
        UnknownSession => (StatusCode::NOT_FOUND, json!({"error": "unknown_session"})),
        UnknownView(view) => (
            StatusCode::NOT_FOUND,
            json!({"error": "unknown_view", "view": view}),
        ),
        OutOfOrder { expected, got } => (
            StatusCode::CONFLICT,
            json!({"error": "out_of_order", "expected": expected, "got": got}),
        ),
        SessionMismatch => (
            StatusCode::BAD_REQUEST,
            json!({"error": "session_mismatch"}),
        ),
        UnknownComponent(id) => (
            StatusCode::BAD_REQUEST,
            json!({"error": "unknown_component", "id": id.to_string()}),
        ),
        UnknownEvent { id, event } => (
            StatusCode::BAD_REQUEST,
            json!({"error": "unknown_event", "id": id.to_string(), "event": event.to_string()}),
        ),
        Rejected(reason) => (
            StatusCode::BAD_REQUEST,
            json!({"error": "rejected", "reason": reason}),
        ),
        Application(e) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            json!({"error": "application_error", "reason": e.to_string()}),
        ),
    };
    error_body(status, body)
}

fn internal(reason: impl std::fmt::Display) -> Response {
    error_body(
        StatusCode::INTERNAL_SERVER_ERROR,
        json!({"error": "internal", "reason": reason.to_string()}),
    )
}

/// Failure inside a blocking handler section.
enum Failure {
    Runtime(RuntimeError),
    Internal(String),
}

impl Failure {
    fn internal(e: impl std::fmt::Display) -> Self {
        Failure::Internal(e.to_string())
    }

    fn into_response(self) -> Response {
        match self {
            Failure::Runtime(e) => runtime_error(&e),
            Failure::Internal(reason) => internal(reason),
        }
    }
}

impl From<RuntimeError> for Failure {
    fn from(e: RuntimeError) -> Self {
        Failure::Runtime(e)
    }
}

#[derive(serde::Deserialize)]
struct AppQuery {
    view: Option<String>,
}

async fn bootstrap(State(state): State<AppState>, Query(query): Query<AppQuery>) -> Response {
    let view = query.view.filter(|v| !v.is_empty());
    let result = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, Failure> {
        let guard = state.recorder.as_ref().map(|r| r.0.lock());
        let (session, boot) = state.runtime.create_session(view.as_deref())?;
        let body = encode_server(&boot).map_err(Failure::internal)?;
        if let Some(mut log) = guard {
            let request = DeltaClientMessage {
                fragment: view,
                ..Default::default()
            };
            let request = encode_client(&request).map_err(Failure::internal)?;
            log.append(Direction::ClientToServer, &request)
                .and_then(|()| log.append(Direction::ServerToClient, &body))
                .map_err(Failure::internal)?;
        }
        tracing::debug!(%session, "session created");
        Ok(body)
    })
    .await;
    match result {
        Ok(Ok(body)) => (
            [(header::CONTENT_TYPE, "text/html; charset=utf-8")],
            bootstrap_page(&body),
        )
            .into_response(),
        Ok(Err(failure)) => failure.into_response(),
        Err(join) => internal(join),
    }
}

async fn delta(State(state): State<AppState>, body: Bytes) -> Response {
    let msg = match decode_client(&body) {
        Ok(msg) => msg,
        Err(e) => {
            tracing::debug!(error = %e, "malformed delta");
            return codec_error(&e);
        }
    };
    let result = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, Failure> {
        let guard = state.recorder.as_ref().map(|r| r.0.lock());
        let response = state.runtime.process(&msg.session, &msg)?;
        let out = encode_server(&response).map_err(Failure::internal)?;
        if let Some(mut log) = guard {
            // Record the canonical form so the log is independent of the
            // client's formatting.
            let request = encode_client(&msg).map_err(Failure::internal)?;
            log.append(Direction::ClientToServer, &request)
                .and_then(|()| log.append(Direction::ServerToClient, &out))
                .map_err(Failure::internal)?;
        }
        Ok(out)
    })
    .await;
    match result {
        Ok(Ok(out)) => canonical(StatusCode::OK, out),
        Ok(Err(failure)) => failure.into_response(),
        Err(join) => internal(join),
    }
}

async fn asset(
    State(state): State<AppState>,
    axum::extract::Path(path): axum::extract::Path<String>,
) -> Response {
    let file = match assets::resolve(&state.assets, &path) {
        AssetPath::File(file) => file,
        AssetPath::Forbidden => {
            return error_body(StatusCode::FORBIDDEN, json!({"error": "forbidden"}));
        }
    };
    match tokio::fs::read(&file).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&file))], bytes).into_response(),
        Err(e)
            if matches!(
                e.kind(),
                io::ErrorKind::NotFound | io::ErrorKind::IsADirectory
            ) =>
        {
            error_body(StatusCode::NOT_FOUND, json!({"error": "not_found"}))
        }
        Err(e) => {
            tracing::warn!(file = %file.display(), error = %e, "asset read failed");
            internal(e)
        }
    }
}
