//! Change tracking for one processing cycle and coalescing into delta
//! directives.
//!
//! Recorded changes always refer to components attached below the root at
//! the moment of recording. Ids are issued monotonically, so the tree's id
//! watermark at the start of a cycle tells which components the client
//! already knows: everything numbered below it that is still attached.

use std::collections::{BTreeSet, HashMap};

use crate::component::{ComponentId, ComponentTree};
use crate::model::RepresentationalNode;
use crate::value::PropertyValue;
use crate::widget::EventKind;

#[derive(Debug, Clone, PartialEq)]
pub enum StateChange {
    PropertySet {
        id: ComponentId,
        name: String,
        value: PropertyValue,
    },
    ChildAttached {
        parent: ComponentId,
        child: ComponentId,
        index: usize,
    },
    ChildDetached {
        id: ComponentId,
    },
    ListenersChanged {
        id: ComponentId,
        listened: BTreeSet<EventKind>,
    },
}

/// A partial update to the client's representational model.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaDirective {
    /// Inserts a whole subtree. `parent` is `None` only for the root.
    Create {
        parent: Option<ComponentId>,
        index: usize,
        node: RepresentationalNode,
    },
    Remove {
        id: ComponentId,
    },
    SetProperty {
        id: ComponentId,
        name: String,
        value: PropertyValue,
    },
    SetListeners {
        id: ComponentId,
        listened: BTreeSet<EventKind>,
    },
}

impl DeltaDirective {
    /// The component the directive is about.
    pub fn target(&self) -> ComponentId {
        match self {
            DeltaDirective::Create { node, .. } => node.id,
            DeltaDirective::Remove { id }
            | DeltaDirective::SetProperty { id, .. }
            | DeltaDirective::SetListeners { id, .. } => *id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DeltaDirective::Create { .. } => "create",
            DeltaDirective::Remove { .. } => "remove",
            DeltaDirective::SetProperty { .. } => "set_property",
            DeltaDirective::SetListeners { .. } => "set_listeners",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UpdateError {
    #[error("no processing cycle is open")]
    CycleClosed,
}

#[derive(Debug, Default)]
pub struct DirtyLog {
    changes: Vec<StateChange>,
    open: bool,
    watermark: u64,
}

impl DirtyLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts a processing cycle against the current state of `tree`.
    pub fn open(&mut self, tree: &ComponentTree) {
        self.changes.clear();
        self.open = true;
        self.watermark = tree.watermark();
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn len(&self) -> usize {
        self.changes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    pub fn changes(&self) -> &[StateChange] {
        &self.changes
    }

    pub fn record(&mut self, change: StateChange) -> Result<(), UpdateError> {
        if !self.open {
            return Err(UpdateError::CycleClosed);
        }
        self.changes.push(change);
        Ok(())
    }

    /// Abandons the cycle without producing directives.
    pub fn discard(&mut self) {
        self.changes.clear();
        self.open = false;
    }

    /// Closes the cycle and coalesces the recorded changes against the
    /// post-cycle `tree`. Order: removes, creates (pre-order of the new
    /// tree), then property and listener updates in record order.
    pub fn drain(&mut self, tree: &ComponentTree) -> Vec<DeltaDirective> {
        if !self.open {
            return Vec::new();
        }
        let changes = std::mem::take(&mut self.changes);
        self.open = false;

        let watermark = self.watermark;
        let known = |id: ComponentId| id.number() < watermark;
        let order: HashMap<ComponentId, usize> = tree
            .subtree(tree.root())
            .into_iter()
            .enumerate()
            .map(|(pos, id)| (id, pos))
            .collect();
        let alive = |id: ComponentId| order.contains_key(&id);

        let mut removes = Vec::new();
        let mut creates = Vec::new();
        let mut updates: Vec<DeltaDirective> = Vec::new();
        let mut property_slot: HashMap<(ComponentId, String), usize> = HashMap::new();
        let mut listener_slot: HashMap<ComponentId, usize> = HashMap::new();

        for change in changes {
            match change {
                StateChange::ChildDetached { id } => {
                    if known(id) {
                        removes.push(DeltaDirective::Remove { id });
                    }
                }
                StateChange::ChildAttached { parent, child, .. } => {
                    if known(parent) && alive(child) {
                        creates.push(child);
                    }
                }
                StateChange::PropertySet { id, name, value } => {
                    if !(known(id) && alive(id)) {
                        continue;
                    }
                    match property_slot.get(&(id, name.clone())) {
                        Some(&slot) => {
                            updates[slot] = DeltaDirective::SetProperty { id, name, value };
                        }
                        None => {
                            property_slot.insert((id, name.clone()), updates.len());
                            updates.push(DeltaDirective::SetProperty { id, name, value });
                        }
                    }
                }
                StateChange::ListenersChanged { id, listened } => {
                    if !(known(id) && alive(id)) {
                        continue;
                    }
                    match listener_slot.get(&id) {
                        Some(&slot) => {
                            updates[slot] = DeltaDirective::SetListeners { id, listened }
                        }
                        None => {
                            listener_slot.insert(id, updates.len());
                            updates.push(DeltaDirective::SetListeners { id, listened });
                        }
                    }
                }
            }
        }

        creates.sort_by_key(|id| order[id]);
        creates.dedup();
        let creates = creates.into_iter().map(|id| {
            let parent = tree.parent(id).expect("attached non-root has a parent");
            let index = tree
                .children(parent)
                .iter()
                .position(|c| *c == id)
                .expect("parent lists child");
            DeltaDirective::Create {
                parent: Some(parent),
                index,
                node: tree.render_subtree(id),
            }
        });

        removes.into_iter().chain(creates).chain(updates).collect()
    }
}
