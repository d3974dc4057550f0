//! The server-side component tree.
//!
//! A [`ComponentTree`] always has a `window` root. Components are created
//! floating (no parent) and become part of the user interface once they are
//! attached below the root. Only attached components are rendered.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::model::{RepresentationalModel, RepresentationalNode};
use crate::ui::Ui;
use crate::value::{PropertyValue, ValueKind};
use crate::widget::{EventKind, WidgetType};

/// Server-issued component identifier, written `c<n>` with `n >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId(u64);

impl ComponentId {
    pub fn new(n: u64) -> Option<Self> {
        (n > 0).then_some(ComponentId(n))
    }

    pub fn number(self) -> u64 {
        self.0
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid component id `{0}`")]
pub struct InvalidComponentId(pub String);

impl FromStr for ComponentId {
    type Err = InvalidComponentId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || InvalidComponentId(s.to_owned());
        let digits = s.strip_prefix('c').ok_or_else(err)?;
        if digits.is_empty()
            || digits.starts_with('0')
            || !digits.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(err());
        }
        digits
            .parse()
            .ok()
            .and_then(ComponentId::new)
            .ok_or_else(err)
    }
}

/// An event delivered to server-side listeners.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub source: ComponentId,
    pub kind: EventKind,
    pub payload: Option<PropertyValue>,
}

/// Server-side event listener. Runs synchronously with access to the
/// session's component tree.
pub type Listener = Arc<dyn Fn(&mut Ui<'_>, &Event) -> Result<(), ComponentError> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ListenerHandle {
    pub component: ComponentId,
    pub event: EventKind,
    serial: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ComponentError {
    #[error("unknown component type `{0}`")]
    UnknownType(String),
    #[error("property `{property}` is not declared for {widget}")]
    UnknownProperty {
        widget: WidgetType,
        property: String,
    },
    #[error("property `{property}` expects {expected}, got {found}")]
    PropertyTypeMismatch {
        property: String,
        expected: ValueKind,
        found: ValueKind,
    },
    #[error("real values must be finite")]
    NonFinite,
    #[error("unknown component {0}")]
    UnknownId(ComponentId),
    #[error("{0} already has a parent")]
    NotDetached(ComponentId),
    #[error("{0} cannot contain children")]
    NotAContainer(ComponentId),
    #[error("index {index} out of range for {len} children")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("attaching {child} below {parent} would create a cycle")]
    WouldCycle {
        parent: ComponentId,
        child: ComponentId,
    },
    #[error("the root window cannot be detached")]
    CannotDetachRoot,
    #[error("{widget} does not emit `{event}` events")]
    UnknownEventType {
        widget: WidgetType,
        event: EventKind,
    },
    #[error("{0}")]
    Application(String),
}

#[derive(Clone)]
struct Node {
    widget: WidgetType,
    properties: BTreeMap<String, PropertyValue>,
    listeners: BTreeMap<EventKind, Vec<(u64, Listener)>>,
    children: Vec<ComponentId>,
    parent: Option<ComponentId>,
}

impl Node {
    fn listened_events(&self) -> BTreeSet<EventKind> {
        self.listeners
            .iter()
            .filter(|(_, list)| !list.is_empty())
            .map(|(event, _)| *event)
            .collect()
    }
}

/// Stateful hierarchy of UI components with their listeners.
#[derive(Clone)]
pub struct ComponentTree {
    root: ComponentId,
    nodes: BTreeMap<ComponentId, Node>,
    next_id: u64,
    next_listener: u64,
}

impl fmt::Debug for ComponentTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComponentTree")
            .field("root", &self.root)
            .field("components", &self.nodes.len())
            .field("next_id", &self.next_id)
            .finish()
    }
}

impl Default for ComponentTree {
    fn default() -> Self {
        Self::new()
    }
}

impl ComponentTree {
    /// A tree holding only an empty `window` root, `c1`.
    pub fn new() -> Self {
        let root = ComponentId(1);
        let mut nodes = BTreeMap::new();
        nodes.insert(
            root,
            Node {
                widget: WidgetType::Window,
                properties: BTreeMap::new(),
                listeners: BTreeMap::new(),
                children: Vec::new(),
                parent: None,
            },
        );
        ComponentTree {
            root,
            nodes,
            next_id: 2,
            next_listener: 1,
        }
    }

    pub fn root(&self) -> ComponentId {
        self.root
    }

    /// The numeric part of the next id to be issued. Every id issued so far
    /// is strictly below it.
    pub fn watermark(&self) -> u64 {
        self.next_id
    }

    pub fn contains(&self, id: ComponentId) -> bool {
        self.nodes.contains_key(&id)
    }

    fn node(&self, id: ComponentId) -> Result<&Node, ComponentError> {
        self.nodes.get(&id).ok_or(ComponentError::UnknownId(id))
    }

    fn node_mut(&mut self, id: ComponentId) -> Result<&mut Node, ComponentError> {
        self.nodes.get_mut(&id).ok_or(ComponentError::UnknownId(id))
    }

    pub fn widget(&self, id: ComponentId) -> Option<WidgetType> {
        self.nodes.get(&id).map(|n| n.widget)
    }

    pub fn property(&self, id: ComponentId, name: &str) -> Option<&PropertyValue> {
        self.nodes.get(&id)?.properties.get(name)
    }

    pub fn properties(&self, id: ComponentId) -> Option<&BTreeMap<String, PropertyValue>> {
        self.nodes.get(&id).map(|n| &n.properties)
    }

    pub fn children(&self, id: ComponentId) -> &[ComponentId] {
        self.nodes.get(&id).map_or(&[], |n| &n.children)
    }

    pub fn parent(&self, id: ComponentId) -> Option<ComponentId> {
        self.nodes.get(&id)?.parent
    }

    pub fn listened_events(&self, id: ComponentId) -> BTreeSet<EventKind> {
        self.nodes
            .get(&id)
            .map(Node::listened_events)
            .unwrap_or_default()
    }

    /// Listeners for `event` on `id`, in registration order.
    pub fn listeners(&self, id: ComponentId, event: EventKind) -> Vec<Listener> {
        self.nodes
            .get(&id)
            .and_then(|n| n.listeners.get(&event))
            .map(|list| list.iter().map(|(_, l)| Arc::clone(l)).collect())
            .unwrap_or_default()
    }

    /// True when `id` is reachable from the root.
    pub fn is_attached(&self, id: ComponentId) -> bool {
        let mut cur = Some(id);
        while let Some(c) = cur {
            if c == self.root {
                return true;
            }
            cur = self.nodes.get(&c).and_then(|n| n.parent);
        }
        false
    }

    /// Pre-order list of the components reachable from `id`.
    pub fn subtree(&self, id: ComponentId) -> Vec<ComponentId> {
        let mut out = Vec::new();
        if !self.contains(id) {
            return out;
        }
        let mut stack = vec![id];
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend(self.children(c).iter().rev().copied());
        }
        out
    }

    /// Number of components reachable from the root.
    pub fn len(&self) -> usize {
        self.subtree(self.root).len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of components that exist but are not attached below the root.
    pub fn floating_count(&self) -> usize {
        self.nodes.len() - self.len()
    }

    pub fn create(
        &mut self,
        widget: WidgetType,
        properties: impl IntoIterator<Item = (impl Into<String>, PropertyValue)>,
    ) -> Result<ComponentId, ComponentError> {
        let mut props: BTreeMap<String, PropertyValue> = widget
            .properties()
            .iter()
            .filter_map(|p| Some((p.name.to_owned(), widget.default_value(p.name)?)))
            .collect();
        for (name, value) in properties {
            let name = name.into();
            check_property(widget, &name, &value)?;
            props.insert(name, value);
        }
        let id = ComponentId(self.next_id);
        self.next_id += 1;
        self.nodes.insert(
            id,
            Node {
                widget,
                properties: props,
                listeners: BTreeMap::new(),
                children: Vec::new(),
                parent: None,
            },
        );
        Ok(id)
    }

    /// Same as [`create`](Self::create) with the type given by name.
    pub fn create_named(
        &mut self,
        widget: &str,
        properties: impl IntoIterator<Item = (impl Into<String>, PropertyValue)>,
    ) -> Result<ComponentId, ComponentError> {
        let widget: WidgetType = widget
            .parse()
            .map_err(|_| ComponentError::UnknownType(widget.to_owned()))?;
        self.create(widget, properties)
    }

    pub fn attach(
        &mut self,
        parent: ComponentId,
        child: ComponentId,
        index: usize,
    ) -> Result<(), ComponentError> {
        let parent_node = self.node(parent)?;
        let child_node = self.node(child)?;
        if child_node.parent.is_some() || child == self.root {
            return Err(ComponentError::NotDetached(child));
        }
        if !parent_node.widget.is_container() {
            return Err(ComponentError::NotAContainer(parent));
        }
        let len = parent_node.children.len();
        if index > len {
            return Err(ComponentError::IndexOutOfRange { index, len });
        }
        // The child is floating, so the parent lies inside its subtree iff
        // walking up from the parent reaches the child.
        let mut cur = Some(parent);
        while let Some(c) = cur {
            if c == child {
                return Err(ComponentError::WouldCycle { parent, child });
            }
            cur = self.nodes[&c].parent;
        }
        self.node_mut(parent)?.children.insert(index, child);
        self.node_mut(child)?.parent = Some(parent);
        Ok(())
    }

    /// Removes `id` and its whole subtree. Returns the removed ids in
    /// pre-order.
    pub fn detach(&mut self, id: ComponentId) -> Result<Vec<ComponentId>, ComponentError> {
        if id == self.root {
            return Err(ComponentError::CannotDetachRoot);
        }
        let parent = self.node(id)?.parent;
        if let Some(p) = parent {
            self.node_mut(p)?.children.retain(|c| *c != id);
        }
        let removed = self.subtree(id);
        for c in &removed {
            self.nodes.remove(c);
        }
        Ok(removed)
    }

    /// Writes a property. Returns whether the stored value changed.
    pub fn set_property(
        &mut self,
        id: ComponentId,
        name: &str,
        value: PropertyValue,
    ) -> Result<bool, ComponentError> {
        let node = self.node_mut(id)?;
        check_property(node.widget, name, &value)?;
        let slot = node
            .properties
            .get_mut(name)
            .expect("declared properties are always populated");
        if *slot == value {
            return Ok(false);
        }
        *slot = value;
        Ok(true)
    }

    pub fn add_listener(
        &mut self,
        id: ComponentId,
        event: EventKind,
        listener: Listener,
    ) -> Result<ListenerHandle, ComponentError> {
        let serial = self.next_listener;
        let node = self.node_mut(id)?;
        if !node.widget.emits(event) {
            return Err(ComponentError::UnknownEventType {
                widget: node.widget,
                event,
            });
        }
        node.listeners
            .entry(event)
            .or_default()
            .push((serial, listener));
        self.next_listener += 1;
        Ok(ListenerHandle {
            component: id,
            event,
            serial,
        })
    }

    /// Returns whether a listener was removed.
    pub fn remove_listener(&mut self, handle: ListenerHandle) -> bool {
        let Some(list) = self
            .nodes
            .get_mut(&handle.component)
            .and_then(|n| n.listeners.get_mut(&handle.event))
        else {
            return false;
        };
        let before = list.len();
        list.retain(|(serial, _)| *serial != handle.serial);
        before != list.len()
    }

    /// Removes every listener for `event` on `id`.
    pub fn clear_listeners(
        &mut self,
        id: ComponentId,
        event: EventKind,
    ) -> Result<(), ComponentError> {
        self.node_mut(id)?.listeners.remove(&event);
        Ok(())
    }

    /// Drops every component not reachable from the root.
    pub fn collect_floating(&mut self) -> usize {
        let reachable: BTreeSet<_> = self.subtree(self.root).into_iter().collect();
        let before = self.nodes.len();
        self.nodes.retain(|id, _| reachable.contains(id));
        before - self.nodes.len()
    }

    /// Renders the attached tree into the client representational model.
    pub fn render_full(&self) -> RepresentationalModel {
        RepresentationalModel::from_root(self.render_subtree(self.root))
    }

    /// Renders `id` and its descendants.
    ///
    /// # Panics
    ///
    /// If `id` is not in the tree.
    pub fn render_subtree(&self, id: ComponentId) -> RepresentationalNode {
        let node = &self.nodes[&id];
        RepresentationalNode {
            id,
            widget: node.widget,
            properties: node.properties.clone(),
            listened: node.listened_events(),
            children: node
                .children
                .iter()
                .map(|c| self.render_subtree(*c))
                .collect(),
        }
    }

    /// Verifies the structural invariants. Used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<(), String> {
        let root = self.nodes.get(&self.root).ok_or("root missing")?;
        if root.widget != WidgetType::Window || root.parent.is_some() {
            return Err("root must be a parentless window".into());
        }
        for (id, node) in &self.nodes {
            if id.0 >= self.next_id {
                return Err(format!("{id} not below the id counter"));
            }
            let mut seen = BTreeSet::new();
            for c in &node.children {
                if !seen.insert(*c) {
                    return Err(format!("{id} lists {c} twice"));
                }
                let child = self
                    .nodes
                    .get(c)
                    .ok_or(format!("{id} has dangling child {c}"))?;
                if child.parent != Some(*id) {
                    return Err(format!("{c} does not point back to {id}"));
                }
            }
            if let Some(p) = node.parent {
                let parent = self
                    .nodes
                    .get(&p)
                    .ok_or(format!("{id} has dangling parent"))?;
                if !parent.children.contains(id) {
                    return Err(format!("{p} does not list {id}"));
                }
            }
            if !node.children.is_empty() && !node.widget.is_container() {
                return Err(format!("leaf {id} has children"));
            }
            for (name, value) in &node.properties {
                check_property(node.widget, name, value).map_err(|e| e.to_string())?;
            }
            for event in node.listeners.keys() {
                if !node.widget.emits(*event) {
                    return Err(format!("{id} listens for foreign event {event}"));
                }
            }
            // Cycle check: the parent chain must terminate within |nodes| steps.
            let mut cur = node.parent;
            let mut steps = 0;
            while let Some(c) = cur {
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(format!("cycle through {id}"));
                }
                cur = self.nodes[&c].parent;
            }
        }
        Ok(())
    }
}

fn check_property(
    widget: WidgetType,
    name: &str,
    value: &PropertyValue,
) -> Result<(), ComponentError> {
    let spec = widget
        .property(name)
        .ok_or_else(|| ComponentError::UnknownProperty {
            widget,
            property: name.to_owned(),
        })?;
    if value.kind() != spec.kind {
        return Err(ComponentError::PropertyTypeMismatch {
            property: name.to_owned(),
            expected: spec.kind,
            found: value.kind(),
        });
    }
    if !value.is_finite() {
        return Err(ComponentError::NonFinite);
    }
    Ok(())
}
