//! Wire encoding of DELTA-CLIENT and DELTA-SERVER messages.
//!
//! Messages are UTF-8 JSON objects with lexicographically sorted keys and no
//! insignificant whitespace, so equal messages always encode to equal bytes.
//! Every message carries `"v":1`.
//!
//! ```text
//! client: {"action":null|{"event","id"[,"payload"]},"fragment":null|str,
//!          "seq":u64,"session":str,"state_changes":[{"id","name","value"}],"v":1}
//! server: {"ack":u64,"directives":[directive],"fragment":null|str,"session":str,"v":1}
//! directive (by "kind"):
//!   create        {"children","id","index","kind","listened_events","parent","properties","type"}
//!   remove        {"id","kind"}
//!   set_property  {"id","kind","name","value"}
//!   set_listeners {"id","kind","listened_events"}
//! ```
//!
//! `children` of a create holds nested nodes with the keys `children`, `id`,
//! `listened_events`, `properties` and `type`. Property values map onto
//! native JSON: strings, integers, finite reals, booleans, null, and arrays
//! of strings.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{Map, Number, Value};

use crate::component::ComponentId;
use crate::model::RepresentationalNode;
use crate::update::DeltaDirective;
use crate::value::PropertyValue;
use crate::widget::{EventKind, WidgetType};

pub const PROTOCOL_VERSION: u64 = 1;

/// A client-side property write carried to the server.
#[derive(Debug, Clone, PartialEq)]
pub struct StateWrite {
    pub id: ComponentId,
    pub name: String,
    pub value: PropertyValue,
}

/// The user action that triggered a DELTA-CLIENT message.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRequest {
    pub id: ComponentId,
    pub event: EventKind,
    pub payload: Option<PropertyValue>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeltaClientMessage {
    /// Empty on bootstrap.
    pub session: String,
    pub seq: u64,
    pub state_changes: Vec<StateWrite>,
    pub action: Option<ActionRequest>,
    pub fragment: Option<String>,
}

impl DeltaClientMessage {
    /// Bootstrap messages (seq 0) may be empty; every other message must
    /// carry a write, an action or a fragment.
    pub fn has_content(&self) -> bool {
        !self.state_changes.is_empty() || self.action.is_some() || self.fragment.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeltaServerMessage {
    pub session: String,
    /// The seq of the request being answered; 0 for bootstrap.
    pub ack: u64,
    pub directives: Vec<DeltaDirective>,
    pub fragment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodecError {
    #[error("malformed message at {position}: {reason}")]
    MalformedMessage { position: String, reason: String },
    #[error("unknown directive kind `{0}`")]
    UnknownDirectiveKind(String),
    #[error("unknown value tag at {position}")]
    UnknownValueTag { position: String },
    #[error("message cannot be encoded: {0}")]
    Unencodable(String),
}

fn malformed(position: &str, reason: impl Into<String>) -> CodecError {
    CodecError::MalformedMessage {
        position: position.to_owned(),
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------------------
// encoding

pub fn encode_client(msg: &DeltaClientMessage) -> Result<Vec<u8>, CodecError> {
    if msg.seq > 0 && !msg.has_content() {
        return Err(CodecError::Unencodable(
            "non-bootstrap message without writes, action or fragment".into(),
        ));
    }
    let mut root = Map::new();
    let action = match &msg.action {
        None => Value::Null,
        Some(a) => {
            let mut m = Map::new();
            m.insert("event".into(), a.event.name().into());
            m.insert("id".into(), a.id.to_string().into());
            if let Some(p) = &a.payload {
                m.insert("payload".into(), value_to_json(p)?);
            }
            Value::Object(m)
        }
    };
    root.insert("action".into(), action);
    root.insert("fragment".into(), opt_string(&msg.fragment));
    root.insert("seq".into(), msg.seq.into());
    root.insert("session".into(), msg.session.clone().into());
    let writes = msg
        .state_changes
        .iter()
        .map(|w| {
            let mut m = Map::new();
            m.insert("id".into(), w.id.to_string().into());
            m.insert("name".into(), w.name.clone().into());
            m.insert("value".into(), value_to_json(&w.value)?);
            Ok(Value::Object(m))
        })
        .collect::<Result<Vec<_>, CodecError>>()?;
    root.insert("state_changes".into(), Value::Array(writes));
    root.insert("v".into(), PROTOCOL_VERSION.into());
    Ok(to_canonical_bytes(&Value::Object(root)))
}

pub fn encode_server(msg: &DeltaServerMessage) -> Result<Vec<u8>, CodecError> {
    let mut root = Map::new();
    root.insert("ack".into(), msg.ack.into());
    let directives = msg
        .directives
        .iter()
        .map(directive_to_json)
        .collect::<Result<Vec<_>, _>>()?;
    root.insert("directives".into(), Value::Array(directives));
    root.insert("fragment".into(), opt_string(&msg.fragment));
    root.insert("session".into(), msg.session.clone().into());
    root.insert("v".into(), PROTOCOL_VERSION.into());
    Ok(to_canonical_bytes(&Value::Object(root)))
}

fn opt_string(s: &Option<String>) -> Value {
    s.clone().map_or(Value::Null, Value::String)
}

fn value_to_json(value: &PropertyValue) -> Result<Value, CodecError> {
    Ok(match value {
        PropertyValue::Text(s) => Value::String(s.clone()),
        PropertyValue::Integer(i) => Value::Number((*i).into()),
        PropertyValue::Real(r) => Value::Number(
            Number::from_f64(*r)
                .ok_or_else(|| CodecError::Unencodable(format!("non-finite real {r}")))?,
        ),
        PropertyValue::Boolean(b) => Value::Bool(*b),
        PropertyValue::Null => Value::Null,
        PropertyValue::TextList(items) => {
            Value::Array(items.iter().cloned().map(Value::String).collect())
        }
    })
}

fn events_to_json(events: &BTreeSet<EventKind>) -> Value {
    Value::Array(events.iter().map(|e| e.name().into()).collect())
}

fn node_fields(node: &RepresentationalNode, m: &mut Map<String, Value>) -> Result<(), CodecError> {
    let children = node
        .children
        .iter()
        .map(|c| {
            let mut cm = Map::new();
            node_fields(c, &mut cm)?;
            Ok(Value::Object(cm))
        })
        .collect::<Result<Vec<_>, CodecError>>()?;
    m.insert("children".into(), Value::Array(children));
    m.insert("id".into(), node.id.to_string().into());
    m.insert("listened_events".into(), events_to_json(&node.listened));
    let props = node
        .properties
        .iter()
        .map(|(k, v)| Ok((k.clone(), value_to_json(v)?)))
        .collect::<Result<Map<_, _>, CodecError>>()?;
    m.insert("properties".into(), Value::Object(props));
    m.insert("type".into(), node.widget.name().into());
    Ok(())
}

fn directive_to_json(directive: &DeltaDirective) -> Result<Value, CodecError> {
    let mut m = Map::new();
    m.insert("kind".into(), directive.kind().into());
    match directive {
        DeltaDirective::Create {
            parent,
            index,
            node,
        } => {
            node_fields(node, &mut m)?;
            m.insert("index".into(), (*index as u64).into());
            m.insert(
                "parent".into(),
                parent.map_or(Value::Null, |p| p.to_string().into()),
            );
        }
        DeltaDirective::Remove { id } => {
            m.insert("id".into(), id.to_string().into());
        }
        DeltaDirective::SetProperty { id, name, value } => {
            m.insert("id".into(), id.to_string().into());
            m.insert("name".into(), name.clone().into());
            m.insert("value".into(), value_to_json(value)?);
        }
        DeltaDirective::SetListeners { id, listened } => {
            m.insert("id".into(), id.to_string().into());
            m.insert("listened_events".into(), events_to_json(listened));
        }
    }
    Ok(Value::Object(m))
}

/// Serializes `value` with sorted object keys and no whitespace.
pub fn to_canonical_bytes(value: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                serde_json::to_writer(&mut *out, k).expect("writing to a Vec cannot fail");
                out.push(b':');
                write_canonical(v, out);
            }
            out.push(b'}');
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_canonical(v, out);
            }
            out.push(b']');
        }
        scalar => serde_json::to_writer(&mut *out, scalar).expect("writing to a Vec cannot fail"),
    }
}

// ---------------------------------------------------------------------------
// decoding

fn parse(bytes: &[u8]) -> Result<Value, CodecError> {
    serde_json::from_slice(bytes).map_err(|e| CodecError::MalformedMessage {
        position: format!("line {} column {}", e.line(), e.column()),
        reason: e.to_string(),
    })
}

/// A JSON object being decoded, with its location for error reports.
struct Obj<'v> {
    map: &'v Map<String, Value>,
    path: String,
}

impl<'v> Obj<'v> {
    fn new(value: &'v Value, path: String, keys: &[&str]) -> Result<Self, CodecError> {
        let map = value
            .as_object()
            .ok_or_else(|| malformed(&path, "expected an object"))?;
        if let Some(extra) = map.keys().find(|k| !keys.contains(&k.as_str())) {
            return Err(malformed(&path, format!("unexpected key `{extra}`")));
        }
        Ok(Obj { map, path })
    }

    fn at(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    fn get(&self, key: &str) -> Result<&'v Value, CodecError> {
        self.map
            .get(key)
            .ok_or_else(|| malformed(&self.path, format!("missing `{key}`")))
    }

    fn string(&self, key: &str) -> Result<&'v str, CodecError> {
        self.get(key)?
            .as_str()
            .ok_or_else(|| malformed(&self.at(key), "expected a string"))
    }

    fn opt_string(&self, key: &str) -> Result<Option<String>, CodecError> {
        match self.get(key)? {
            Value::Null => Ok(None),
            Value::String(s) => Ok(Some(s.clone())),
            _ => Err(malformed(&self.at(key), "expected a string or null")),
        }
    }

    fn unsigned(&self, key: &str) -> Result<u64, CodecError> {
        self.get(key)?
            .as_u64()
            .ok_or_else(|| malformed(&self.at(key), "expected a non-negative integer"))
    }

    fn id(&self, key: &str) -> Result<ComponentId, CodecError> {
        self.string(key)?
            .parse()
            .map_err(|e: crate::component::InvalidComponentId| {
                malformed(&self.at(key), e.to_string())
            })
    }

    fn array(&self, key: &str) -> Result<&'v Vec<Value>, CodecError> {
        self.get(key)?
            .as_array()
            .ok_or_else(|| malformed(&self.at(key), "expected an array"))
    }

    fn version(&self) -> Result<(), CodecError> {
        match self.get("v")?.as_u64() {
            Some(PROTOCOL_VERSION) => Ok(()),
            _ => Err(malformed(&self.at("v"), "unsupported protocol version")),
        }
    }
}

fn value_from_json(value: &Value, path: &str) -> Result<PropertyValue, CodecError> {
    Ok(match value {
        Value::Null => PropertyValue::Null,
        Value::Bool(b) => PropertyValue::Boolean(*b),
        Value::String(s) => PropertyValue::Text(s.clone()),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                PropertyValue::Integer(i)
            } else if n.is_u64() {
                return Err(malformed(path, "integer outside the 64-bit signed range"));
            } else {
                match n.as_f64() {
                    Some(r) if r.is_finite() => PropertyValue::Real(r),
                    _ => return Err(malformed(path, "non-finite real")),
                }
            }
        }
        Value::Array(items) => PropertyValue::TextList(
            items
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.as_str()
                        .map(str::to_owned)
                        .ok_or_else(|| CodecError::UnknownValueTag {
                            position: format!("{path}[{i}]"),
                        })
                })
                .collect::<Result<_, _>>()?,
        ),
        Value::Object(_) => {
            return Err(CodecError::UnknownValueTag {
                position: path.to_owned(),
            })
        }
    })
}

fn event_from_json(value: &Value, path: &str) -> Result<EventKind, CodecError> {
    let name = value
        .as_str()
        .ok_or_else(|| malformed(path, "expected an event name"))?;
    name.parse()
        .map_err(|e: crate::widget::UnknownEventName| malformed(path, e.to_string()))
}

fn events_from_json(
    obj: &Obj<'_>,
    widget: Option<WidgetType>,
) -> Result<BTreeSet<EventKind>, CodecError> {
    let mut out = BTreeSet::new();
    for (i, v) in obj.array("listened_events")?.iter().enumerate() {
        let path = format!("{}[{i}]", obj.at("listened_events"));
        let event = event_from_json(v, &path)?;
        if let Some(w) = widget {
            if !w.emits(event) {
                return Err(malformed(&path, format!("{w} does not emit `{event}`")));
            }
        }
        if !out.insert(event) {
            return Err(malformed(&path, "duplicate event"));
        }
    }
    Ok(out)
}

const NODE_KEYS: &[&str] = &["children", "id", "listened_events", "properties", "type"];
const CREATE_KEYS: &[&str] = &[
    "children",
    "id",
    "index",
    "kind",
    "listened_events",
    "parent",
    "properties",
    "type",
];

fn node_from_obj(obj: &Obj<'_>) -> Result<RepresentationalNode, CodecError> {
    let children = obj
        .array("children")?
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let child = Obj::new(c, format!("{}[{i}]", obj.at("children")), NODE_KEYS)?;
            node_from_obj(&child)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let id = obj.id("id")?;
    let widget: WidgetType = obj
        .string("type")?
        .parse()
        .map_err(|e: crate::widget::UnknownWidgetType| malformed(&obj.at("type"), e.to_string()))?;
    let listened = events_from_json(obj, Some(widget))?;
    let props_obj = obj.get("properties")?;
    let props_map = props_obj
        .as_object()
        .ok_or_else(|| malformed(&obj.at("properties"), "expected an object"))?;
    let properties = props_map
        .iter()
        .map(|(k, v)| {
            Ok((
                k.clone(),
                value_from_json(v, &format!("{}.{k}", obj.at("properties")))?,
            ))
        })
        .collect::<Result<BTreeMap<_, _>, CodecError>>()?;
    Ok(RepresentationalNode {
        id,
        widget,
        properties,
        listened,
        children,
    })
}

fn directive_from_json(value: &Value, path: String) -> Result<DeltaDirective, CodecError> {
    let kind = value
        .as_object()
        .ok_or_else(|| malformed(&path, "expected an object"))?
        .get("kind")
        .ok_or_else(|| malformed(&path, "missing `kind`"))?
        .as_str()
        .ok_or_else(|| malformed(&format!("{path}.kind"), "expected a string"))?;
    match kind {
        "create" => {
            let obj = Obj::new(value, path, CREATE_KEYS)?;
            let node = node_from_obj(&obj)?;
            let index = usize::try_from(obj.unsigned("index")?)
                .map_err(|_| malformed(&obj.at("index"), "index too large"))?;
            let parent = match obj.get("parent")? {
                Value::Null => None,
                _ => Some(obj.id("parent")?),
            };
            Ok(DeltaDirective::Create {
                parent,
                index,
                node,
            })
        }
        "remove" => {
            let obj = Obj::new(value, path, &["id", "kind"])?;
            Ok(DeltaDirective::Remove { id: obj.id("id")? })
        }
        "set_property" => {
            let obj = Obj::new(value, path, &["id", "kind", "name", "value"])?;
            Ok(DeltaDirective::SetProperty {
                id: obj.id("id")?,
                name: obj.string("name")?.to_owned(),
                value: value_from_json(obj.get("value")?, &obj.at("value"))?,
            })
        }
        "set_listeners" => {
            let obj = Obj::new(value, path, &["id", "kind", "listened_events"])?;
            Ok(DeltaDirective::SetListeners {
                id: obj.id("id")?,
                listened: events_from_json(&obj, None)?,
            })
        }
        other => Err(CodecError::UnknownDirectiveKind(other.to_owned())),
    }
}

pub fn decode_server(bytes: &[u8]) -> Result<DeltaServerMessage, CodecError> {
    let value = parse(bytes)?;
    let obj = Obj::new(
        &value,
        "$".into(),
        &["ack", "directives", "fragment", "session", "v"],
    )?;
    let ack = obj.unsigned("ack")?;
    let directives = obj
        .array("directives")?
        .iter()
        .enumerate()
        .map(|(i, d)| directive_from_json(d, format!("$.directives[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let fragment = obj.opt_string("fragment")?;
    let session = obj.string("session")?.to_owned();
    obj.version()?;
    Ok(DeltaServerMessage {
        session,
        ack,
        directives,
        fragment,
    })
}

pub fn decode_client(bytes: &[u8]) -> Result<DeltaClientMessage, CodecError> {
    let value = parse(bytes)?;
    let obj = Obj::new(
        &value,
        "$".into(),
        &["action", "fragment", "seq", "session", "state_changes", "v"],
    )?;
    let action = match obj.get("action")? {
        Value::Null => None,
        v => {
            let a = Obj::new(v, obj.at("action"), &["event", "id", "payload"])?;
            Some(ActionRequest {
                event: event_from_json(a.get("event")?, &a.at("event"))?,
                id: a.id("id")?,
                payload: match a.map.get("payload") {
                    None => None,
                    Some(p) => Some(value_from_json(p, &a.at("payload"))?),
                },
            })
        }
    };
    let fragment = obj.opt_string("fragment")?;
    let seq = obj.unsigned("seq")?;
    let session = obj.string("session")?.to_owned();
    let state_changes = obj
        .array("state_changes")?
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let w = Obj::new(w, format!("$.state_changes[{i}]"), &["id", "name", "value"])?;
            Ok(StateWrite {
                id: w.id("id")?,
                name: w.string("name")?.to_owned(),
                value: value_from_json(w.get("value")?, &w.at("value"))?,
            })
        })
        .collect::<Result<Vec<_>, CodecError>>()?;
    obj.version()?;
    let msg = DeltaClientMessage {
        session,
        seq,
        state_changes,
        action,
        fragment,
    };
    if msg.seq > 0 && !msg.has_content() {
        return Err(malformed(
            "$",
            "non-bootstrap message without writes, action or fragment",
        ));
    }
    Ok(msg)
}
