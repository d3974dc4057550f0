//! Headless client engine.
//!
//! A non-blocking state machine: producing a DELTA-CLIENT message and
//! applying the matching DELTA-SERVER message are separate transitions, and
//! local-only events stay usable while a request is outstanding. At most one
//! request is outstanding at a time.

use std::collections::HashMap;

use crate::codec::{ActionRequest, DeltaClientMessage, DeltaServerMessage, StateWrite};
use crate::component::ComponentId;
use crate::model::{ModelError, RepresentationalModel};
use crate::value::{PropertyValue, ValueKind};
use crate::widget::{EventKind, WidgetType};

#[derive(Debug, Clone, PartialEq)]
pub struct UserEvent {
    pub target: ComponentId,
    pub event: EventKind,
    pub payload: Option<PropertyValue>,
}

impl UserEvent {
    pub fn action(target: ComponentId) -> Self {
        UserEvent {
            target,
            event: EventKind::Action,
            payload: None,
        }
    }

    pub fn value_change(target: ComponentId, value: impl Into<PropertyValue>) -> Self {
        UserEvent {
            target,
            event: EventKind::ValueChange,
            payload: Some(value.into()),
        }
    }
}

/// What a client-side handler may touch: the model and the pending write
/// buffer. Never the network.
pub struct LocalContext<'a> {
    model: &'a mut RepresentationalModel,
    pending: &'a mut Vec<StateWrite>,
}

impl LocalContext<'_> {
    pub fn get(&self, id: ComponentId, name: &str) -> Option<&PropertyValue> {
        self.model.find(id)?.properties.get(name)
    }

    /// Writes into the model and buffers the write for the next round-trip.
    pub fn write(&mut self, id: ComponentId, name: &str, value: PropertyValue) {
        write_local(self.model, self.pending, id, name, value);
    }
}

fn write_local(
    model: &mut RepresentationalModel,
    pending: &mut Vec<StateWrite>,
    id: ComponentId,
    name: &str,
    value: PropertyValue,
) {
    if let Some(node) = model.find_mut(id) {
        node.properties.insert(name.to_owned(), value.clone());
    }
    match pending.iter_mut().find(|w| w.id == id && w.name == name) {
        Some(w) => w.value = value,
        None => pending.push(StateWrite {
            id,
            name: name.to_owned(),
            value,
        }),
    }
}

pub type ClientHandler = fn(&mut LocalContext<'_>, &UserEvent);

/// Enter in a text field: mark it with `style = "error"` while empty.
pub fn validate_non_empty(ctx: &mut LocalContext<'_>, ev: &UserEvent) {
    let empty = ctx
        .get(ev.target, "value")
        .and_then(PropertyValue::as_text)
        .is_none_or(str::is_empty);
    let style = if empty { "error" } else { "" };
    if ctx.get(ev.target, "style").and_then(PropertyValue::as_text) != Some(style) {
        ctx.write(ev.target, "style", style.into());
    }
}

/// A checkbox click without an explicit value flips `checked` locally.
pub fn toggle_checkbox(ctx: &mut LocalContext<'_>, ev: &UserEvent) {
    if ev.payload.is_some() {
        return;
    }
    let checked = ctx
        .get(ev.target, "checked")
        .and_then(PropertyValue::as_bool)
        .unwrap_or(false);
    ctx.write(ev.target, "checked", (!checked).into());
}

pub fn builtin_handlers() -> HashMap<(WidgetType, EventKind), ClientHandler> {
    HashMap::from([
        (
            (WidgetType::TextField, EventKind::Action),
            validate_non_empty as ClientHandler,
        ),
        (
            (WidgetType::CheckBox, EventKind::ValueChange),
            toggle_checkbox as ClientHandler,
        ),
    ])
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("bootstrap response must acknowledge seq 0, got {0}")]
    NotBootstrap(u64),
    #[error("response acknowledges {got}, outstanding request is {expected:?}")]
    AckMismatch { expected: Option<u64>, got: u64 },
    #[error("malformed directive: {0}")]
    MalformedDirective(String),
    #[error("unknown component {0}")]
    UnknownComponent(ComponentId),
    #[error("a request is already in flight")]
    Busy,
    #[error("{widget} value expects {expected}, got {found}")]
    InvalidPayload {
        widget: WidgetType,
        expected: ValueKind,
        found: ValueKind,
    },
}

impl From<ModelError> for EngineError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::UnknownComponent(id) => EngineError::UnknownComponent(id),
            ModelError::MalformedDirective(r) => EngineError::MalformedDirective(r),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    session: String,
    next_seq: u64,
    model: RepresentationalModel,
    pending: Vec<StateWrite>,
    fragment: Option<String>,
    in_flight: Option<u64>,
    handlers: HashMap<(WidgetType, EventKind), ClientHandler>,
    sent: u64,
}

impl Engine {
    /// Starts an engine from the bootstrap response. `fragment` is the view
    /// named in the address bar, used when the response carries none.
    pub fn bootstrap(
        response: &DeltaServerMessage,
        fragment: Option<&str>,
    ) -> Result<Engine, EngineError> {
        if response.ack != 0 {
            return Err(EngineError::NotBootstrap(response.ack));
        }
        let mut model = RepresentationalModel::empty();
        model.apply_all(&response.directives)?;
        Ok(Engine {
            session: response.session.clone(),
            next_seq: 1,
            model,
            pending: Vec::new(),
            fragment: response
                .fragment
                .clone()
                .or_else(|| fragment.map(str::to_owned)),
            in_flight: None,
            handlers: builtin_handlers(),
            sent: 0,
        })
    }

    pub fn session(&self) -> &str {
        &self.session
    }

    pub fn model(&self) -> &RepresentationalModel {
        &self.model
    }

    pub fn pending(&self) -> &[StateWrite] {
        &self.pending
    }

    pub fn fragment(&self) -> Option<&str> {
        self.fragment.as_deref()
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn is_in_flight(&self) -> bool {
        self.in_flight.is_some()
    }

    /// Number of DELTA-CLIENT messages produced so far.
    pub fn messages_sent(&self) -> u64 {
        self.sent
    }

    /// Registers (or replaces) a local handler.
    pub fn set_handler(&mut self, widget: WidgetType, event: EventKind, handler: ClientHandler) {
        self.handlers.insert((widget, event), handler);
    }

    pub fn remove_handler(&mut self, widget: WidgetType, event: EventKind) {
        self.handlers.remove(&(widget, event));
    }

    fn flush(
        &mut self,
        action: Option<ActionRequest>,
        fragment: Option<String>,
    ) -> DeltaClientMessage {
        let msg = DeltaClientMessage {
            session: self.session.clone(),
            seq: self.next_seq,
            state_changes: std::mem::take(&mut self.pending),
            action,
            fragment,
        };
        self.in_flight = Some(msg.seq);
        self.sent += 1;
        msg
    }

    /// Decides how a user event is handled. Returns the message to send when
    /// the server listens for the event.
    pub fn simulate_event(
        &mut self,
        ev: UserEvent,
    ) -> Result<Option<DeltaClientMessage>, EngineError> {
        let node = self
            .model
            .find(ev.target)
            .ok_or(EngineError::UnknownComponent(ev.target))?;
        let widget = node.widget;
        if !widget.emits(ev.event) {
            return Ok(None);
        }
        let listened = node.listened.contains(&ev.event);
        if listened && self.in_flight.is_some() {
            return Err(EngineError::Busy);
        }

        let mut wrote = false;
        let mut echoed = false;
        if ev.event == EventKind::ValueChange {
            match &ev.payload {
                Some(payload) => {
                    let spec = widget
                        .value_property()
                        .expect("widgets emitting value-change declare a value property");
                    if payload.kind() != spec.kind {
                        return Err(EngineError::InvalidPayload {
                            widget,
                            expected: spec.kind,
                            found: payload.kind(),
                        });
                    }
                    write_local(
                        &mut self.model,
                        &mut self.pending,
                        ev.target,
                        spec.name,
                        payload.clone(),
                    );
                    wrote = true;
                }
                None => {
                    // No value given: the local handler works out the new
                    // value (a checkbox click toggles) before any round-trip.
                    echoed = self.run_handler(widget, &ev);
                    wrote = echoed && self.pending.iter().any(|w| w.id == ev.target);
                }
            }
        }

        if listened {
            // A value-change travels as its state write; the server fires
            // value-change listeners for every written component.
            let action = (!wrote).then(|| ActionRequest {
                id: ev.target,
                event: ev.event,
                payload: ev.payload.clone(),
            });
            return Ok(Some(self.flush(action, None)));
        }
        if !echoed {
            self.run_handler(widget, &ev);
        }
        Ok(None)
    }

    fn run_handler(&mut self, widget: WidgetType, ev: &UserEvent) -> bool {
        let Some(handler) = self.handlers.get(&(widget, ev.event)).copied() else {
            return false;
        };
        let mut ctx = LocalContext {
            model: &mut self.model,
            pending: &mut self.pending,
        };
        handler(&mut ctx, ev);
        true
    }

    /// Applies the response to the outstanding request.
    pub fn apply_server_delta(&mut self, response: &DeltaServerMessage) -> Result<(), EngineError> {
        if self.in_flight != Some(response.ack) {
            return Err(EngineError::AckMismatch {
                expected: self.in_flight,
                got: response.ack,
            });
        }
        let mut model = self.model.clone();
        model.apply_all(&response.directives)?;
        // Writes made while the request was out are kept and re-echoed.
        let mut pending = std::mem::take(&mut self.pending);
        pending.retain(|w| model.contains(w.id));
        for w in &pending {
            if let Some(node) = model.find_mut(w.id) {
                node.properties.insert(w.name.clone(), w.value.clone());
            }
        }
        self.model = model;
        self.pending = pending;
        self.in_flight = None;
        self.next_seq += 1;
        self.fragment = response.fragment.clone();
        Ok(())
    }

    /// Requests a switch to the view named by a URI fragment.
    pub fn navigate(&mut self, view: &str) -> Result<DeltaClientMessage, EngineError> {
        if self.in_flight.is_some() {
            return Err(EngineError::Busy);
        }
        Ok(self.flush(None, Some(view.to_owned())))
    }
}
