//! Single-page application framework core.
//!
//! A stateful server-side component tree is mirrored by a client-side
//! representational model. The two are kept in sync only through delta
//! messages: the client sends its state changes together with the action
//! that triggered them, and the server answers with an ordered list of
//! directives that patch the client model.
//!
//! * [`component`]: the server component tree and its full render.
//! * [`update`]: per-cycle change tracking and directive coalescing.
//! * [`model`]: the client model and directive application.
//! * [`codec`]: the canonical JSON wire format.
//! * [`session`]: the per-session request pipeline.
//! * [`client`]: a headless client engine.
//! * [`traffic`]: recorded traffic, traces and size statistics.
//! * [`demo`]: the bundled two-view demo application.

pub mod client;
pub mod codec;
pub mod component;
pub mod demo;
pub mod model;
pub mod session;
#[cfg(feature = "testkit")]
pub mod testkit;
pub mod traffic;
pub mod ui;
pub mod update;
pub mod value;
pub mod widget;

pub use client::{Engine, EngineError, UserEvent};
pub use codec::{
    decode_client, decode_server, encode_client, encode_server, ActionRequest, CodecError,
    DeltaClientMessage, DeltaServerMessage, StateWrite,
};
pub use component::{ComponentError, ComponentId, ComponentTree, Event, ListenerHandle};
pub use model::{RepresentationalModel, RepresentationalNode};
pub use session::{ApplicationDefinition, Runtime, RuntimeError, SessionId};
pub use ui::Ui;
pub use update::{DeltaDirective, DirtyLog, StateChange};
pub use value::{PropertyValue, ValueKind};
pub use widget::{EventKind, WidgetType};
