//! Session runtime: owns per-client component trees and runs the request
//! pipeline (sequencing, client writes, view switch, action dispatch,
//! delta rendering).
//!
//! Requests for one session are processed under that session's mutex, so
//! concurrent requests are observed in some sequential order. Different
//! sessions never share a lock beyond the short map lookup.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{Mutex, RwLock};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::codec::{DeltaClientMessage, DeltaServerMessage};
use crate::component::{ComponentError, ComponentId, ComponentTree, Event};
use crate::model::RepresentationalModel;
use crate::ui::Ui;
use crate::update::{DeltaDirective, DirtyLog};
use crate::widget::EventKind;

/// Application code that builds or mutates the tree.
pub type Procedure = Arc<dyn Fn(&mut Ui<'_>) -> Result<(), ComponentError> + Send + Sync>;

/// A view name usable as a URI fragment: non-empty, unreserved characters
/// only (`A-Z a-z 0-9 - . _ ~`).
pub fn is_valid_view_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~'))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{0}` is not a valid view name")]
pub struct InvalidViewName(pub String);

/// What the server needs to run an application: an initializer and a set of
/// named, URI-addressable views.
#[derive(Clone)]
pub struct ApplicationDefinition {
    init: Procedure,
    views: BTreeMap<String, Procedure>,
}

impl fmt::Debug for ApplicationDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ApplicationDefinition")
            .field("views", &self.views.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

impl ApplicationDefinition {
    pub fn new<F>(init: F) -> Self
    where
        F: Fn(&mut Ui<'_>) -> Result<(), ComponentError> + Send + Sync + 'static,
    {
        ApplicationDefinition {
            init: Arc::new(init),
            views: BTreeMap::new(),
        }
    }

    pub fn with_view<F>(mut self, name: &str, view: F) -> Result<Self, InvalidViewName>
    where
        F: Fn(&mut Ui<'_>) -> Result<(), ComponentError> + Send + Sync + 'static,
    {
        if !is_valid_view_name(name) {
            return Err(InvalidViewName(name.to_owned()));
        }
        self.views.insert(name.to_owned(), Arc::new(view));
        Ok(self)
    }

    pub fn view_names(&self) -> impl Iterator<Item = &str> {
        self.views.keys().map(String::as_str)
    }

    pub fn has_view(&self, name: &str) -> bool {
        self.views.contains_key(name)
    }

    /// Runs the initializer (and optionally a view) on a fresh tree, outside
    /// any processing cycle.
    pub fn build(&self, view: Option<&str>) -> Result<ComponentTree, RuntimeError> {
        let view = view
            .map(|v| {
                self.views
                    .get(v)
                    .cloned()
                    .ok_or_else(|| RuntimeError::UnknownView(v.to_owned()))
            })
            .transpose()?;
        let mut tree = ComponentTree::new();
        let mut log = DirtyLog::new();
        let mut ui = Ui::new(&mut tree, &mut log);
        (self.init)(&mut ui)?;
        if let Some(view) = view {
            view(&mut ui)?;
        }
        tree.collect_floating();
        Ok(tree)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId(String);

impl SessionId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error("unknown session")]
    UnknownSession,
    #[error("message addressed to a different session")]
    SessionMismatch,
    #[error("out of order: expected seq {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("unknown component {0}")]
    UnknownComponent(ComponentId),
    #[error("{id} does not emit `{event}` events")]
    UnknownEvent { id: ComponentId, event: EventKind },
    #[error("unknown view `{0}`")]
    UnknownView(String),
    #[error("rejected: {0}")]
    Rejected(String),
    #[error("application error: {0}")]
    Application(#[from] ComponentError),
}

struct Session {
    id: SessionId,
    tree: ComponentTree,
    log: DirtyLog,
    expected_seq: u64,
    last_request: Option<DeltaClientMessage>,
    last_response: DeltaServerMessage,
    current_view: Option<String>,
    last_access: Instant,
    expired: bool,
}

/// Owns every live session of one application.
pub struct Runtime {
    app: Arc<ApplicationDefinition>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    rng: Mutex<StdRng>,
    idle_timeout: Option<Duration>,
}

impl fmt::Debug for Runtime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Runtime")
            .field("sessions", &self.session_count())
            .field("idle_timeout", &self.idle_timeout)
            .finish_non_exhaustive()
    }
}

impl Runtime {
    pub fn new(app: ApplicationDefinition) -> Self {
        Self::with_rng(app, StdRng::from_os_rng())
    }

    /// Runtime whose session ids are drawn from a seeded generator.
    pub fn with_seed(app: ApplicationDefinition, seed: u64) -> Self {
        Self::with_rng(app, StdRng::seed_from_u64(seed))
    }

    fn with_rng(app: ApplicationDefinition, rng: StdRng) -> Self {
        Runtime {
            app: Arc::new(app),
            sessions: RwLock::new(HashMap::new()),
            rng: Mutex::new(rng),
            idle_timeout: None,
        }
    }

    /// Sessions idle for longer than `timeout` are expired.
    pub fn with_idle_timeout(mut self, timeout: Duration) -> Self {
        self.idle_timeout = Some(timeout);
        self
    }

    pub fn app(&self) -> &ApplicationDefinition {
        &self.app
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().len()
    }

    fn fresh_id(&self) -> SessionId {
        let bits: u128 = self.rng.lock().random();
        SessionId(format!("{bits:032x}"))
    }

    /// Builds a new session and returns its bootstrap message: a single
    /// create of the whole tree against the empty model.
    pub fn create_session(
        &self,
        fragment: Option<&str>,
    ) -> Result<(SessionId, DeltaServerMessage), RuntimeError> {
        let tree = self.app.build(fragment)?;
        let id = loop {
            let candidate = self.fresh_id();
            if !self.sessions.read().contains_key(candidate.as_str()) {
                break candidate;
            }
        };
        let response = DeltaServerMessage {
            session: id.0.clone(),
            ack: 0,
            directives: vec![DeltaDirective::Create {
                parent: None,
                index: 0,
                node: tree.render_subtree(tree.root()),
            }],
            fragment: fragment.map(str::to_owned),
        };
        let session = Session {
            id: id.clone(),
            tree,
            log: DirtyLog::new(),
            expected_seq: 1,
            last_request: None,
            last_response: response.clone(),
            current_view: fragment.map(str::to_owned),
            last_access: Instant::now(),
            expired: false,
        };
        self.sessions
            .write()
            .insert(id.0.clone(), Arc::new(Mutex::new(session)));
        Ok((id, response))
    }

    fn lookup(&self, session_id: &str) -> Result<Arc<Mutex<Session>>, RuntimeError> {
        self.sessions
            .read()
            .get(session_id)
            .cloned()
            .ok_or(RuntimeError::UnknownSession)
    }

    fn remove(&self, session_id: &str) {
        self.sessions.write().remove(session_id);
    }

    /// Runs `f` with the session locked, handling lazy idle expiry.
    fn with_session<R>(
        &self,
        session_id: &str,
        f: impl FnOnce(&mut Session) -> Result<R, RuntimeError>,
    ) -> Result<R, RuntimeError> {
        let handle = self.lookup(session_id)?;
        let mut session = handle.lock();
        if session.expired {
            return Err(RuntimeError::UnknownSession);
        }
        if let Some(timeout) = self.idle_timeout {
            if session.last_access.elapsed() > timeout {
                session.expired = true;
                drop(session);
                self.remove(session_id);
                return Err(RuntimeError::UnknownSession);
            }
        }
        session.last_access = Instant::now();
        f(&mut session)
    }

    /// Handles one DELTA-CLIENT message for `session_id`.
    pub fn process(
        &self,
        session_id: &str,
        msg: &DeltaClientMessage,
    ) -> Result<DeltaServerMessage, RuntimeError> {
        if msg.session != session_id {
            return Err(RuntimeError::SessionMismatch);
        }
        let app = Arc::clone(&self.app);
        self.with_session(session_id, |session| session.process(&app, msg))
    }

    pub fn expire_session(&self, session_id: &str) -> Result<(), RuntimeError> {
        let handle = self
            .sessions
            .write()
            .remove(session_id)
            .ok_or(RuntimeError::UnknownSession)?;
        handle.lock().expired = true;
        Ok(())
    }

    /// Expires every session idle for longer than the configured timeout.
    /// Returns how many were dropped.
    pub fn expire_idle(&self) -> usize {
        let Some(timeout) = self.idle_timeout else {
            return 0;
        };
        let stale: Vec<String> = self
            .sessions
            .read()
            .iter()
            .filter(|(_, s)| {
                s.try_lock()
                    .is_some_and(|s| s.last_access.elapsed() > timeout)
            })
            .map(|(id, _)| id.clone())
            .collect();
        stale
            .iter()
            .filter(|id| self.expire_session(id).is_ok())
            .count()
    }

    /// Full render of the session's current tree.
    pub fn render(&self, session_id: &str) -> Result<RepresentationalModel, RuntimeError> {
        self.inspect(session_id, ComponentTree::render_full)
    }

    /// Read-only access to a session's tree.
    pub fn inspect<R>(
        &self,
        session_id: &str,
        f: impl FnOnce(&ComponentTree) -> R,
    ) -> Result<R, RuntimeError> {
        let handle = self.lookup(session_id)?;
        let session = handle.lock();
        if session.expired {
            return Err(RuntimeError::UnknownSession);
        }
        Ok(f(&session.tree))
    }

    pub fn current_view(&self, session_id: &str) -> Result<Option<String>, RuntimeError> {
        let handle = self.lookup(session_id)?;
        let session = handle.lock();
        Ok(session.current_view.clone())
    }
}

impl Session {
    fn process(
        &mut self,
        app: &ApplicationDefinition,
        msg: &DeltaClientMessage,
    ) -> Result<DeltaServerMessage, RuntimeError> {
        if msg.seq + 1 == self.expected_seq {
            let same = match &self.last_request {
                Some(prev) => prev == msg,
                None => !msg.has_content(),
            };
            if same {
                return Ok(self.last_response.clone());
            }
        }
        if msg.seq != self.expected_seq {
            return Err(RuntimeError::OutOfOrder {
                expected: self.expected_seq,
                got: msg.seq,
            });
        }

        let snapshot = self.tree.clone();
        let view_before = self.current_view.clone();
        self.log.open(&self.tree);
        match self.run_pipeline(app, msg) {
            Ok(()) => {}
            Err(e) => {
                self.log.discard();
                self.tree = snapshot;
                self.current_view = view_before;
                return Err(e);
            }
        }
        let directives = self.log.drain(&self.tree);
        self.tree.collect_floating();
        let response = DeltaServerMessage {
            session: self.id.0.clone(),
            ack: msg.seq,
            directives,
            fragment: self.current_view.clone(),
        };
        self.last_request = Some(msg.clone());
        self.last_response = response.clone();
        self.expected_seq += 1;
        Ok(response)
    }

    fn run_pipeline(
        &mut self,
        app: &ApplicationDefinition,
        msg: &DeltaClientMessage,
    ) -> Result<(), RuntimeError> {
        if let Some(action) = &msg.action {
            let widget = self
                .tree
                .widget(action.id)
                .filter(|_| self.tree.is_attached(action.id))
                .ok_or(RuntimeError::UnknownComponent(action.id))?;
            if !widget.emits(action.event) {
                return Err(RuntimeError::UnknownEvent {
                    id: action.id,
                    event: action.event,
                });
            }
        }

        let mut ui = Ui::new(&mut self.tree, &mut self.log);

        // Client state changes: all writes first, then one value-change
        // notification per written component.
        let mut changed: Vec<ComponentId> = Vec::new();
        for write in &msg.state_changes {
            let widget = ui
                .tree()
                .widget(write.id)
                .filter(|_| ui.tree().is_attached(write.id))
                .ok_or(RuntimeError::UnknownComponent(write.id))?;
            let spec = widget
                .property(&write.name)
                .filter(|p| p.client_writable)
                .ok_or_else(|| {
                    RuntimeError::Rejected(format!(
                        "`{}` of {} ({widget}) is not client-writable",
                        write.name, write.id
                    ))
                })?;
            if write.value.kind() != spec.kind {
                return Err(RuntimeError::Rejected(format!(
                    "`{}` of {} expects {}, got {}",
                    write.name,
                    write.id,
                    spec.kind,
                    write.value.kind()
                )));
            }
            ui.set_property(write.id, &write.name, write.value.clone())?;
            if !changed.contains(&write.id) {
                changed.push(write.id);
            }
        }
        for id in changed {
            // A listener may have removed a component written earlier.
            let Some(widget) = ui.tree().widget(id) else {
                continue;
            };
            if !widget.emits(EventKind::ValueChange) {
                continue;
            }
            let payload = widget
                .value_property()
                .and_then(|p| ui.property(id, p.name).cloned());
            ui.fire(&Event {
                source: id,
                kind: EventKind::ValueChange,
                payload,
            })?;
        }

        if let Some(view) = &msg.fragment {
            let procedure = app
                .views
                .get(view)
                .cloned()
                .ok_or_else(|| RuntimeError::UnknownView(view.clone()))?;
            procedure(&mut ui)?;
            self.current_view = Some(view.clone());
        }

        if let Some(action) = &msg.action {
            // Listeners fired above may have removed the target; the action
            // then has nothing left to act on.
            if ui.tree().is_attached(action.id) {
                ui.fire(&Event {
                    source: action.id,
                    kind: action.event,
                    payload: action.payload.clone(),
                })?;
            }
        }
        Ok(())
    }
}
