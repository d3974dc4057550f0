//! Mutation handle given to application code: initializers, view procedures
//! and listeners. Every change made through it that affects the attached
//! tree is recorded for the update manager.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::component::{ComponentError, ComponentId, ComponentTree, Event, ListenerHandle};
use crate::update::{DirtyLog, StateChange};
use crate::value::PropertyValue;
use crate::widget::{EventKind, WidgetType};

pub struct Ui<'a> {
    tree: &'a mut ComponentTree,
    log: &'a mut DirtyLog,
}

impl<'a> Ui<'a> {
    pub fn new(tree: &'a mut ComponentTree, log: &'a mut DirtyLog) -> Self {
        Ui { tree, log }
    }

    pub fn tree(&self) -> &ComponentTree {
        self.tree
    }

    pub fn root(&self) -> ComponentId {
        self.tree.root()
    }

    fn record(&mut self, change: StateChange) {
        // Outside a cycle (initial build) there is nothing to track: the
        // bootstrap renders the whole tree.
        if self.log.is_open() {
            self.log.record(change).expect("log checked open");
        }
    }

    fn record_listeners(&mut self, id: ComponentId, before: BTreeSet<EventKind>) {
        let after = self.tree.listened_events(id);
        if after != before && self.tree.is_attached(id) {
            self.record(StateChange::ListenersChanged {
                id,
                listened: after,
            });
        }
    }

    pub fn create(
        &mut self,
        widget: WidgetType,
        properties: impl IntoIterator<Item = (impl Into<String>, PropertyValue)>,
    ) -> Result<ComponentId, ComponentError> {
        self.tree.create(widget, properties)
    }

    pub fn attach(
        &mut self,
        parent: ComponentId,
        child: ComponentId,
        index: usize,
    ) -> Result<(), ComponentError> {
        self.tree.attach(parent, child, index)?;
        if self.tree.is_attached(parent) {
            self.record(StateChange::ChildAttached {
                parent,
                child,
                index,
            });
        }
        Ok(())
    }

    /// Attaches `child` as the last child of `parent`.
    pub fn append(
        &mut self,
        parent: ComponentId,
        child: ComponentId,
    ) -> Result<(), ComponentError> {
        let index = self.tree.children(parent).len();
        self.attach(parent, child, index)
    }

    /// Creates a component and appends it to `parent`.
    pub fn add(
        &mut self,
        parent: ComponentId,
        widget: WidgetType,
        properties: impl IntoIterator<Item = (impl Into<String>, PropertyValue)>,
    ) -> Result<ComponentId, ComponentError> {
        let id = self.create(widget, properties)?;
        self.append(parent, id)?;
        Ok(id)
    }

    pub fn detach(&mut self, id: ComponentId) -> Result<(), ComponentError> {
        let attached = self.tree.is_attached(id);
        self.tree.detach(id)?;
        if attached {
            self.record(StateChange::ChildDetached { id });
        }
        Ok(())
    }

    /// Detaches every child of `id`.
    pub fn clear_children(&mut self, id: ComponentId) -> Result<(), ComponentError> {
        for child in self.tree.children(id).to_vec() {
            self.detach(child)?;
        }
        Ok(())
    }

    pub fn set_property(
        &mut self,
        id: ComponentId,
        name: &str,
        value: impl Into<PropertyValue>,
    ) -> Result<(), ComponentError> {
        let value = value.into();
        if self.tree.set_property(id, name, value.clone())? && self.tree.is_attached(id) {
            self.record(StateChange::PropertySet {
                id,
                name: name.to_owned(),
                value,
            });
        }
        Ok(())
    }

    pub fn property(&self, id: ComponentId, name: &str) -> Option<&PropertyValue> {
        self.tree.property(id, name)
    }

    /// Text property, or the empty string when absent or not text.
    pub fn text(&self, id: ComponentId, name: &str) -> String {
        self.property(id, name)
            .and_then(PropertyValue::as_text)
            .unwrap_or_default()
            .to_owned()
    }

    pub fn add_listener<F>(
        &mut self,
        id: ComponentId,
        event: EventKind,
        listener: F,
    ) -> Result<ListenerHandle, ComponentError>
    where
        F: Fn(&mut Ui<'_>, &Event) -> Result<(), ComponentError> + Send + Sync + 'static,
    {
        let before = self.tree.listened_events(id);
        let handle = self.tree.add_listener(id, event, Arc::new(listener))?;
        self.record_listeners(id, before);
        Ok(handle)
    }

    pub fn remove_listener(&mut self, handle: ListenerHandle) -> bool {
        let before = self.tree.listened_events(handle.component);
        let removed = self.tree.remove_listener(handle);
        self.record_listeners(handle.component, before);
        removed
    }

    pub fn clear_listeners(
        &mut self,
        id: ComponentId,
        event: EventKind,
    ) -> Result<(), ComponentError> {
        let before = self.tree.listened_events(id);
        self.tree.clear_listeners(id, event)?;
        self.record_listeners(id, before);
        Ok(())
    }

    /// Fires the listeners registered for `event` on its source, in
    /// registration order.
    pub fn fire(&mut self, event: &Event) -> Result<(), ComponentError> {
        for listener in self.tree.listeners(event.source, event.kind) {
            listener(self, event)?;
        }
        Ok(())
    }
}
