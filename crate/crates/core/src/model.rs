//! Client-side representational model and delta application.

use std::collections::{BTreeMap, BTreeSet};

use crate::component::ComponentId;
use crate::update::DeltaDirective;
use crate::value::PropertyValue;
use crate::widget::{EventKind, WidgetType};

/// One node of the run-time UI abstraction held by the client.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationalNode {
    pub id: ComponentId,
    pub widget: WidgetType,
    pub properties: BTreeMap<String, PropertyValue>,
    /// Events for which the server has registered listeners.
    pub listened: BTreeSet<EventKind>,
    pub children: Vec<RepresentationalNode>,
}

impl RepresentationalNode {
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Self::node_count).sum::<usize>()
    }

    pub fn find(&self, id: ComponentId) -> Option<&RepresentationalNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }

    pub fn find_mut(&mut self, id: ComponentId) -> Option<&mut RepresentationalNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(id))
    }

    /// Pre-order ids of this subtree.
    pub fn ids(&self) -> Vec<ComponentId> {
        let mut out = Vec::new();
        self.collect_ids(&mut out);
        out
    }

    fn collect_ids(&self, out: &mut Vec<ComponentId>) {
        out.push(self.id);
        for c in &self.children {
            c.collect_ids(out);
        }
    }

    fn remove_descendant(&mut self, id: ComponentId) -> bool {
        if let Some(pos) = self.children.iter().position(|c| c.id == id) {
            self.children.remove(pos);
            return true;
        }
        self.children.iter_mut().any(|c| c.remove_descendant(id))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("directive references unknown component {0}")]
    UnknownComponent(ComponentId),
    #[error("malformed directive: {0}")]
    MalformedDirective(String),
}

/// The client's mirror of the attached component tree. Empty before
/// bootstrap.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RepresentationalModel {
    root: Option<RepresentationalNode>,
}

impl RepresentationalModel {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_root(root: RepresentationalNode) -> Self {
        RepresentationalModel { root: Some(root) }
    }

    pub fn root(&self) -> Option<&RepresentationalNode> {
        self.root.as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    pub fn node_count(&self) -> usize {
        self.root
            .as_ref()
            .map_or(0, RepresentationalNode::node_count)
    }

    pub fn find(&self, id: ComponentId) -> Option<&RepresentationalNode> {
        self.root.as_ref()?.find(id)
    }

    pub fn find_mut(&mut self, id: ComponentId) -> Option<&mut RepresentationalNode> {
        self.root.as_mut()?.find_mut(id)
    }

    pub fn contains(&self, id: ComponentId) -> bool {
        self.find(id).is_some()
    }

    pub fn apply_all<'a>(
        &mut self,
        directives: impl IntoIterator<Item = &'a DeltaDirective>,
    ) -> Result<(), ModelError> {
        directives.into_iter().try_for_each(|d| self.apply(d))
    }

    /// Applies one directive in place. On error the model is unchanged.
    pub fn apply(&mut self, directive: &DeltaDirective) -> Result<(), ModelError> {
        match directive {
            DeltaDirective::Remove { id } => {
                let root = self
                    .root
                    .as_mut()
                    .ok_or(ModelError::UnknownComponent(*id))?;
                if root.id == *id {
                    self.root = None;
                    Ok(())
                } else if root.remove_descendant(*id) {
                    Ok(())
                } else {
                    Err(ModelError::UnknownComponent(*id))
                }
            }
            DeltaDirective::Create {
                parent,
                index,
                node,
            } => {
                if let Some(dup) = node.ids().into_iter().find(|id| self.contains(*id)) {
                    return Err(ModelError::MalformedDirective(format!(
                        "create of {} duplicates existing {dup}",
                        node.id
                    )));
                }
                match parent {
                    None => {
                        if self.root.is_some() || *index != 0 {
                            return Err(ModelError::MalformedDirective(
                                "root create into a non-empty model".into(),
                            ));
                        }
                        self.root = Some(node.clone());
                    }
                    Some(parent) => {
                        let target = self
                            .find_mut(*parent)
                            .ok_or(ModelError::UnknownComponent(*parent))?;
                        if !target.widget.is_container() {
                            return Err(ModelError::MalformedDirective(format!(
                                "{parent} is not a container"
                            )));
                        }
                        if *index > target.children.len() {
                            return Err(ModelError::MalformedDirective(format!(
                                "index {index} out of range for {parent}"
                            )));
                        }
                        target.children.insert(*index, node.clone());
                    }
                }
                Ok(())
            }
            DeltaDirective::SetProperty { id, name, value } => {
                let node = self
                    .find_mut(*id)
                    .ok_or(ModelError::UnknownComponent(*id))?;
                node.properties.insert(name.clone(), value.clone());
                Ok(())
            }
            DeltaDirective::SetListeners { id, listened } => {
                let node = self
                    .find_mut(*id)
                    .ok_or(ModelError::UnknownComponent(*id))?;
                node.listened = listened.clone();
                Ok(())
            }
        }
    }
}
